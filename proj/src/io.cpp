#include "salenc/io.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace salenc {

void write_pgm(const std::string& path, const Tensor& map) {
    int h = 0, w = 0;
    if (map.rank() == 2) {
        h = map.dim(0);
        w = map.dim(1);
    } else if (map.rank() == 3 && map.dim(0) == 1) {
        h = map.dim(1);
        w = map.dim(2);
    } else {
        throw ShapeError("write_pgm: expected {H,W} or {1,H,W}, got " +
                         format_shape(map.shape()));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ContractError("write_pgm: cannot open " + path);
    out << "P5\n" << w << " " << h << "\n255\n";
    for (int i = 0; i < h * w; ++i) {
        double v = map.data()[static_cast<std::size_t>(i)];
        if (v < 0.0) v = 0.0;
        if (v > 1.0) v = 1.0;
        const unsigned char byte = static_cast<unsigned char>(std::lround(v * 255.0));
        out.write(reinterpret_cast<const char*>(&byte), 1);
    }
    if (!out) throw ContractError("write_pgm: write failed for " + path);
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ContractError("cannot open " + path + " for writing");
    out << content;
    if (!out) throw ContractError("write failed for " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ContractError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void save_corpus(const std::string& path, const std::vector<SyntheticScene>& scenes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ContractError("save_corpus: cannot open " + path);
    for (const SyntheticScene& s : scenes) {
        nlohmann::json line;
        line["seed"] = s.seed;
        line["image_size"] = s.image_size;
        nlohmann::json boxes = nlohmann::json::array();
        for (const SceneBox& b : s.boxes) {
            boxes.push_back({{"cx", b.box.cx},
                             {"cy", b.box.cy},
                             {"w", b.box.w},
                             {"h", b.box.h},
                             {"scale", scale_class_name(b.scale)}});
        }
        line["boxes"] = std::move(boxes);
        out << line.dump() << "\n";
    }
    if (!out) throw ContractError("save_corpus: write failed for " + path);
}

std::vector<SyntheticScene> load_corpus(const std::string& path, const SceneConfig& config) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ContractError("load_corpus: cannot open " + path);
    std::vector<SyntheticScene> scenes;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ContractError("load_corpus: bad JSON at " + path + ":" +
                                std::to_string(line_no) + ": " + e.what());
        }
        const std::uint64_t seed = j.at("seed").get<std::uint64_t>();
        const int image_size = j.at("image_size").get<int>();
        if (image_size != config.image_size)
            throw ContractError("load_corpus: line " + std::to_string(line_no) +
                                " has image size " + std::to_string(image_size) +
                                ", config says " + std::to_string(config.image_size));
        SyntheticScene scene = generate_scene(seed, config);
        const auto& boxes = j.at("boxes");
        if (boxes.size() != scene.boxes.size())
            throw ContractError("load_corpus: line " + std::to_string(line_no) + " stores " +
                                std::to_string(boxes.size()) + " boxes but regeneration gives " +
                                std::to_string(scene.boxes.size()) +
                                " (generator config drifted?)");
        for (std::size_t b = 0; b < scene.boxes.size(); ++b) {
            const auto& jb = boxes[b];
            const double dx = std::abs(jb.at("cx").get<double>() - scene.boxes[b].box.cx);
            const double dy = std::abs(jb.at("cy").get<double>() - scene.boxes[b].box.cy);
            const double dw = std::abs(jb.at("w").get<double>() - scene.boxes[b].box.w);
            const double dh = std::abs(jb.at("h").get<double>() - scene.boxes[b].box.h);
            if (dx > 1e-9 || dy > 1e-9 || dw > 1e-9 || dh > 1e-9)
                throw ContractError("load_corpus: line " + std::to_string(line_no) + " box " +
                                    std::to_string(b) +
                                    " does not match regeneration (generator config drifted?)");
            if (jb.at("scale").get<std::string>() !=
                scale_class_name(scene.boxes[b].scale))
                throw ContractError("load_corpus: line " + std::to_string(line_no) + " box " +
                                    std::to_string(b) + " scale class mismatch");
        }
        scenes.push_back(std::move(scene));
    }
    if (scenes.empty()) throw ContractError("load_corpus: " + path + " holds no scenes");
    return scenes;
}

void save_checkpoint(const std::string& base_path, Model& model,
                     const std::string& resolved_config_json) {
    const auto named = model.named_tensors();
    std::ofstream bin(base_path + ".bin", std::ios::binary);
    if (!bin) throw ContractError("save_checkpoint: cannot open " + base_path + ".bin");
    nlohmann::json params = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, tensor] : named) {
        bin.write(reinterpret_cast<const char*>(tensor->data().data()),
                  static_cast<std::streamsize>(tensor->data().size() * sizeof(double)));
        params.push_back(
            {{"name", name}, {"shape", tensor->shape()}, {"offset", offset}});
        offset += tensor->data().size();
    }
    if (!bin) throw ContractError("save_checkpoint: write failed for " + base_path + ".bin");
    nlohmann::json sidecar;
    sidecar["params"] = std::move(params);
    sidecar["total_values"] = offset;
    sidecar["config"] = resolved_config_json.empty()
                            ? nlohmann::json(nullptr)
                            : nlohmann::json::parse(resolved_config_json);
    write_text_file(base_path + ".json", sidecar.dump(2) + "\n");
}

void load_checkpoint(const std::string& base_path, Model& model) {
    nlohmann::json sidecar;
    try {
        sidecar = nlohmann::json::parse(read_text_file(base_path + ".json"));
    } catch (const nlohmann::json::parse_error& e) {
        throw ContractError("load_checkpoint: bad sidecar " + base_path + ".json: " + e.what());
    }
    auto named = model.named_tensors();
    const auto& params = sidecar.at("params");
    if (params.size() != named.size())
        throw ContractError("load_checkpoint: checkpoint has " + std::to_string(params.size()) +
                            " parameters, model expects " + std::to_string(named.size()));
    std::ifstream bin(base_path + ".bin", std::ios::binary);
    if (!bin) throw ContractError("load_checkpoint: cannot open " + base_path + ".bin");
    for (std::size_t i = 0; i < named.size(); ++i) {
        const auto& entry = params[i];
        auto& [name, tensor] = named[i];
        if (entry.at("name").get<std::string>() != name)
            throw ContractError("load_checkpoint: parameter " + std::to_string(i) + " is '" +
                                entry.at("name").get<std::string>() + "', model expects '" +
                                name + "'");
        const std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
        if (shape != tensor->shape())
            throw ContractError("load_checkpoint: '" + name + "' stored as " + format_shape(shape) +
                                ", model expects " + format_shape(tensor->shape()));
        bin.read(reinterpret_cast<char*>(tensor->mutable_data()),
                 static_cast<std::streamsize>(tensor->data().size() * sizeof(double)));
        if (!bin)
            throw ContractError("load_checkpoint: " + base_path + ".bin truncated at '" + name +
                                "'");
    }
}

}  // namespace salenc
