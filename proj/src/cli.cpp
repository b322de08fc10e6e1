#include "salenc/cli.hpp"

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "salenc/io.hpp"
#include "salenc/pipeline.hpp"
#include "salenc/predictor.hpp"

namespace salenc {

namespace {

using nlohmann::json;

// bad user input that should exit 1 rather than 2
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    ModelConfig model;
    SceneConfig scene;
    TrainConfig train;
    int corpus_scenes = 64;
    std::uint64_t corpus_seed = 42;
    std::uint64_t model_seed = 42;
};

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                known = true;
                break;
            }
        if (!known) throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
}

template <typename T>
void maybe(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) obj.at(key).get_to(out);
}

RunConfig parse_run_config(const json& root) {
    check_keys(root, {"model", "scene", "corpus", "train"}, "config");
    RunConfig cfg;
    cfg.scene.image_size = cfg.model.image_size;
    cfg.scene.channels = cfg.model.channels;
    cfg.scene.strides = cfg.model.strides;

    if (root.contains("model")) {
        const json& m = root.at("model");
        check_keys(m,
                   {"image_size", "channels", "hidden", "ffn_width", "heads", "encoder_layers",
                    "strides", "fusion_blocks", "fusion_groups", "gate_reduction",
                    "sample_points", "level_ratios", "layer_ratios", "embedding", "fusion",
                    "redundancy", "nms_threshold", "top_k", "seed"},
                   "config.model");
        maybe(m, "image_size", cfg.model.image_size);
        maybe(m, "channels", cfg.model.channels);
        maybe(m, "hidden", cfg.model.hidden);
        maybe(m, "ffn_width", cfg.model.ffn_width);
        maybe(m, "heads", cfg.model.heads);
        maybe(m, "encoder_layers", cfg.model.encoder_layers);
        maybe(m, "strides", cfg.model.strides);
        maybe(m, "fusion_blocks", cfg.model.fusion_blocks);
        maybe(m, "fusion_groups", cfg.model.fusion_groups);
        maybe(m, "gate_reduction", cfg.model.gate_reduction);
        maybe(m, "sample_points", cfg.model.sample_points);
        maybe(m, "level_ratios", cfg.model.ratios.level_ratios);
        maybe(m, "layer_ratios", cfg.model.ratios.layer_ratios);
        if (m.contains("embedding"))
            cfg.model.embedding = embedding_mode_from_name(m.at("embedding").get<std::string>());
        maybe(m, "fusion", cfg.model.fusion_enabled);
        maybe(m, "redundancy", cfg.model.redundancy_enabled);
        maybe(m, "nms_threshold", cfg.model.nms_threshold);
        maybe(m, "top_k", cfg.model.top_k);
        maybe(m, "seed", cfg.model_seed);
        cfg.scene.image_size = cfg.model.image_size;
        cfg.scene.channels = cfg.model.channels;
        cfg.scene.strides = cfg.model.strides;
    }
    if (root.contains("scene")) {
        const json& s = root.at("scene");
        check_keys(s,
                   {"boxes_per_scene", "mix", "small_range", "medium_range", "large_range",
                    "signature_seed", "bump_amp", "plateau_amp", "background_sigma",
                    "noise_sigma"},
                   "config.scene");
        maybe(s, "boxes_per_scene", cfg.scene.boxes_per_scene);
        if (s.contains("mix")) {
            const auto mix = s.at("mix").get<std::vector<double>>();
            if (mix.size() != 3)
                throw ConfigError("config.scene.mix must list 3 proportions (small,medium,large)");
            cfg.scene.mix_small = mix[0];
            cfg.scene.mix_medium = mix[1];
            cfg.scene.mix_large = mix[2];
        }
        auto range = [&s](const char* key, double& lo, double& hi) {
            if (!s.contains(key)) return;
            const auto r = s.at(key).get<std::vector<double>>();
            if (r.size() != 2) throw ConfigError(std::string("config.scene.") + key +
                                                 " must be [lo, hi]");
            lo = r[0];
            hi = r[1];
        };
        range("small_range", cfg.scene.small_lo, cfg.scene.small_hi);
        range("medium_range", cfg.scene.medium_lo, cfg.scene.medium_hi);
        range("large_range", cfg.scene.large_lo, cfg.scene.large_hi);
        maybe(s, "signature_seed", cfg.scene.signature_seed);
        maybe(s, "bump_amp", cfg.scene.bump_amp);
        maybe(s, "plateau_amp", cfg.scene.plateau_amp);
        maybe(s, "background_sigma", cfg.scene.background_sigma);
        maybe(s, "noise_sigma", cfg.scene.noise_sigma);
    }
    if (root.contains("corpus")) {
        const json& c = root.at("corpus");
        check_keys(c, {"scenes", "seed"}, "config.corpus");
        maybe(c, "scenes", cfg.corpus_scenes);
        maybe(c, "seed", cfg.corpus_seed);
    }
    if (root.contains("train")) {
        const json& t = root.at("train");
        check_keys(t,
                   {"epochs", "learning_rate", "momentum", "alpha", "gamma", "lambda",
                    "eps_clamp", "seed", "supervision", "shuffle_targets"},
                   "config.train");
        maybe(t, "epochs", cfg.train.epochs);
        maybe(t, "learning_rate", cfg.train.learning_rate);
        maybe(t, "momentum", cfg.train.momentum);
        maybe(t, "alpha", cfg.train.focal.alpha);
        maybe(t, "gamma", cfg.train.focal.gamma);
        maybe(t, "lambda", cfg.train.focal.lambda);
        maybe(t, "eps_clamp", cfg.train.focal.eps_clamp);
        maybe(t, "seed", cfg.train.seed);
        if (t.contains("supervision"))
            cfg.train.supervision =
                supervision_from_name(t.at("supervision").get<std::string>());
        maybe(t, "shuffle_targets", cfg.train.shuffle_targets);
    }
    return cfg;
}

json resolved_config_json(const RunConfig& cfg) {
    json root;
    root["model"] = {{"image_size", cfg.model.image_size},
                     {"channels", cfg.model.channels},
                     {"hidden", cfg.model.hidden},
                     {"ffn_width", cfg.model.ffn_width},
                     {"heads", cfg.model.heads},
                     {"encoder_layers", cfg.model.encoder_layers},
                     {"strides", cfg.model.strides},
                     {"fusion_blocks", cfg.model.fusion_blocks},
                     {"fusion_groups", cfg.model.fusion_groups},
                     {"gate_reduction", cfg.model.gate_reduction},
                     {"sample_points", cfg.model.sample_points},
                     {"level_ratios", cfg.model.ratios.level_ratios},
                     {"layer_ratios", cfg.model.ratios.layer_ratios},
                     {"embedding", embedding_mode_name(cfg.model.embedding)},
                     {"fusion", cfg.model.fusion_enabled},
                     {"redundancy", cfg.model.redundancy_enabled},
                     {"nms_threshold", cfg.model.nms_threshold},
                     {"top_k", cfg.model.top_k},
                     {"seed", cfg.model_seed}};
    root["scene"] = {{"boxes_per_scene", cfg.scene.boxes_per_scene},
                     {"mix", {cfg.scene.mix_small, cfg.scene.mix_medium, cfg.scene.mix_large}},
                     {"small_range", {cfg.scene.small_lo, cfg.scene.small_hi}},
                     {"medium_range", {cfg.scene.medium_lo, cfg.scene.medium_hi}},
                     {"large_range", {cfg.scene.large_lo, cfg.scene.large_hi}},
                     {"signature_seed", cfg.scene.signature_seed},
                     {"bump_amp", cfg.scene.bump_amp},
                     {"plateau_amp", cfg.scene.plateau_amp},
                     {"background_sigma", cfg.scene.background_sigma},
                     {"noise_sigma", cfg.scene.noise_sigma}};
    root["corpus"] = {{"scenes", cfg.corpus_scenes}, {"seed", cfg.corpus_seed}};
    root["train"] = {{"epochs", cfg.train.epochs},
                     {"learning_rate", cfg.train.learning_rate},
                     {"momentum", cfg.train.momentum},
                     {"alpha", cfg.train.focal.alpha},
                     {"gamma", cfg.train.focal.gamma},
                     {"lambda", cfg.train.focal.lambda},
                     {"eps_clamp", cfg.train.focal.eps_clamp},
                     {"seed", cfg.train.seed},
                     {"supervision", supervision_name(cfg.train.supervision)},
                     {"shuffle_targets", cfg.train.shuffle_targets}};
    return root;
}

struct Flags {
    std::string config_path;
    std::string out_dir;
    std::string corpus_path;
    std::string checkpoint;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::uint64_t scene_seed = 0;
    bool scene_seed_set = false;
    int scenes = 0;       // gen override
    int top_k = 0;        // init override
    std::string ratios;
    double nms_threshold = -1.0;
    std::string embedding;
    std::string supervision;
    std::string redundancy;
    std::string fusion;
};

FilterRatios parse_ratio_flag(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos)
        throw UsageError("--ratios expects v1,v2,...:w1,w2,... (colon separates level and "
                         "layer ratios)");
    auto parse_list = [](const std::string& part, const char* what) {
        std::vector<double> out;
        std::stringstream ss(part);
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                std::size_t used = 0;
                out.push_back(std::stod(item, &used));
                if (used != item.size()) throw std::invalid_argument(item);
            } catch (const std::exception&) {
                throw UsageError(std::string("--ratios: cannot parse ") + what + " value '" +
                                 item + "'");
            }
        }
        if (out.empty()) throw UsageError(std::string("--ratios: empty ") + what + " list");
        return out;
    };
    FilterRatios r;
    r.level_ratios = parse_list(text.substr(0, colon), "level");
    r.layer_ratios = parse_list(text.substr(colon + 1), "layer");
    return r;
}

bool parse_switch(const std::string& value, const char* flag) {
    if (value == "on") return true;
    if (value == "off") return false;
    throw UsageError(std::string(flag) + " expects 'on' or 'off', got '" + value + "'");
}

RunConfig load_config(const Flags& flags) {
    json root = json::object();
    if (!flags.config_path.empty()) {
        if (!std::filesystem::exists(flags.config_path))
            throw UsageError("config file not found: " + flags.config_path);
        try {
            root = json::parse(read_text_file(flags.config_path));
        } catch (const json::parse_error& e) {
            throw ConfigError("config file " + flags.config_path + " is not valid JSON: " +
                              e.what());
        }
    }
    RunConfig cfg = parse_run_config(root);
    if (flags.seed_set) {
        cfg.corpus_seed = flags.seed;
        cfg.model_seed = flags.seed;
        cfg.train.seed = flags.seed;
    }
    if (!flags.ratios.empty()) cfg.model.ratios = parse_ratio_flag(flags.ratios);
    if (flags.nms_threshold >= 0.0) cfg.model.nms_threshold = flags.nms_threshold;
    if (!flags.embedding.empty())
        cfg.model.embedding = embedding_mode_from_name(flags.embedding);
    if (!flags.supervision.empty())
        cfg.train.supervision = supervision_from_name(flags.supervision);
    if (!flags.redundancy.empty())
        cfg.model.redundancy_enabled = parse_switch(flags.redundancy, "--redundancy");
    if (!flags.fusion.empty()) cfg.model.fusion_enabled = parse_switch(flags.fusion, "--fusion");
    if (flags.scenes > 0) cfg.corpus_scenes = flags.scenes;
    if (flags.top_k > 0) cfg.model.top_k = flags.top_k;
    cfg.model.validate();
    cfg.scene.validate();
    cfg.train.validate();
    return cfg;
}

std::filesystem::path require_out(const Flags& flags) {
    if (flags.out_dir.empty()) throw UsageError("this subcommand requires --out DIR");
    std::filesystem::path dir(flags.out_dir);
    std::filesystem::create_directories(dir);
    return dir;
}

void record_config(const std::filesystem::path& dir, const RunConfig& cfg) {
    write_text_file((dir / "resolved_config.json").string(),
                    resolved_config_json(cfg).dump(2) + "\n");
}

Model make_model(const RunConfig& cfg, const Flags& flags) {
    Model model = Model::init(cfg.model, cfg.model_seed);
    if (!flags.checkpoint.empty()) load_checkpoint(flags.checkpoint, model);
    return model;
}

std::vector<SyntheticScene> obtain_corpus(const RunConfig& cfg, const Flags& flags) {
    if (!flags.corpus_path.empty()) {
        if (!std::filesystem::exists(flags.corpus_path))
            throw UsageError("corpus file not found: " + flags.corpus_path);
        return load_corpus(flags.corpus_path, cfg.scene);
    }
    return generate_corpus(cfg.corpus_seed, cfg.corpus_scenes, cfg.scene);
}

std::uint64_t scene_seed_of(const RunConfig& cfg, const Flags& flags) {
    return flags.scene_seed_set ? flags.scene_seed : cfg.corpus_seed;
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

int cmd_gen(const Flags& flags) {
    const RunConfig cfg = load_config(flags);
    const auto dir = require_out(flags);
    const auto corpus = generate_corpus(cfg.corpus_seed, cfg.corpus_scenes, cfg.scene);
    save_corpus((dir / "corpus.jsonl").string(), corpus);
    record_config(dir, cfg);
    std::cout << "wrote " << corpus.size() << " scenes to " << (dir / "corpus.jsonl").string()
              << "\n";
    return 0;
}

int cmd_train(const Flags& flags) {
    const RunConfig cfg = load_config(flags);
    const auto dir = require_out(flags);
    const auto corpus = obtain_corpus(cfg, flags);
    Model model = make_model(cfg, flags);
    const TrainResult result = train_salience(model, corpus, cfg.train);

    std::ostringstream csv;
    csv << "epoch,loss\n";
    for (std::size_t e = 0; e < result.loss_curve.size(); ++e)
        csv << e << "," << result.loss_curve[e] << "\n";
    write_text_file((dir / "loss.csv").string(), csv.str());
    save_checkpoint((dir / "checkpoint").string(), model, resolved_config_json(cfg).dump());
    record_config(dir, cfg);

    // auc on the training corpus plus a held-out corpus one seed over;
    // train-set auc flatters any model, the held-out number is the one to trust
    const double auc = evaluate_salience_auc(model, corpus);
    const auto holdout = generate_corpus(cfg.corpus_seed + 1, cfg.corpus_scenes, cfg.scene);
    const double auc_holdout = evaluate_salience_auc(model, holdout);
    std::cout << "initial_loss=" << result.initial_loss() << " final_loss=" << result.final_loss()
              << " auc=" << auc << " auc_holdout=" << auc_holdout << "\n";
    return 0;
}

int cmd_select(const Flags& flags) {
    const RunConfig cfg = load_config(flags);
    const auto dir = require_out(flags);
    const SyntheticScene scene = generate_scene(scene_seed_of(cfg, flags), cfg.scene);
    const Model model = make_model(cfg, flags);
    const std::vector<Tensor> pred = predict_salience(scene.pyramid, model.predictor);
    const FilterPlan plan = select_queries(pred, cfg.model.strides, cfg.model.ratios);

    json out;
    out["strides"] = plan.strides;
    out["level_ratios"] = plan.ratios.level_ratios;
    out["layer_ratios"] = plan.ratios.layer_ratios;
    json shapes = json::array();
    for (const LevelShape& s : plan.shapes) shapes.push_back({{"h", s.h}, {"w", s.w}});
    out["shapes"] = std::move(shapes);
    json layers = json::array();
    for (int t = 0; t < plan.layer_count(); ++t) {
        json layer;
        layer["per_level"] = plan.per_level[static_cast<std::size_t>(t)];
        layer["omega"] = plan.omega[static_cast<std::size_t>(t)];
        layers.push_back(std::move(layer));
    }
    out["layers"] = std::move(layers);
    write_text_file((dir / "plan.json").string(), out.dump(2) + "\n");
    record_config(dir, cfg);

    const KeepRatio ratio = measured_keep_ratio(plan);
    std::cout << "selected keep ratio: counted=" << ratio.counted
              << " closed_form=" << ratio.closed_form << "\n";
    return 0;
}

int cmd_cost(const Flags& flags) {
    const RunConfig cfg = load_config(flags);
    const std::vector<LevelShape> shapes = cfg.model.level_shapes();
    const CostBreakdown cost = analytic_cost(shapes, cfg.model.ratios, cfg.model.channels,
                                             cfg.model.heads, cfg.model.sample_points);
    // selection counts do not depend on map values, so zero maps suffice here
    std::vector<Tensor> zero_maps;
    for (const LevelShape& s : shapes) zero_maps.push_back(Tensor::zeros({1, s.h, s.w}));
    const KeepRatio ratio =
        measured_keep_ratio(select_queries(zero_maps, cfg.model.strides, cfg.model.ratios));

    std::ostringstream csv;
    csv << "dense_ops,filtered_ops,keep_ratio_counted,keep_ratio_closed_form\n";
    csv.precision(17);
    csv << cost.dense_ops << "," << cost.filtered_ops << "," << ratio.counted << ","
        << ratio.closed_form << "\n";
    std::cout << csv.str();
    if (!flags.out_dir.empty()) {
        const auto dir = require_out(flags);
        write_text_file((dir / "cost.csv").string(), csv.str());
        record_config(dir, cfg);
    }
    return 0;
}

int cmd_heatmap(const Flags& flags) {
    const RunConfig cfg = load_config(flags);
    const auto dir = require_out(flags);
    const SyntheticScene scene = generate_scene(scene_seed_of(cfg, flags), cfg.scene);
    const Model model = make_model(cfg, flags);
    const std::vector<Tensor> pred = predict_salience(scene.pyramid, model.predictor);
    const std::vector<Tensor> targets = build_salience_targets(
        cfg.model.level_shapes(), cfg.model.strides, scene.plain_boxes());
    for (std::size_t l = 0; l < pred.size(); ++l) {
        write_pgm((dir / ("pred_level" + std::to_string(l) + ".pgm")).string(), pred[l]);
        write_pgm((dir / ("target_level" + std::to_string(l) + ".pgm")).string(), targets[l]);
    }
    record_config(dir, cfg);
    std::cout << "wrote " << pred.size() << " predicted and " << targets.size()
              << " target heatmaps to " << dir.string() << "\n";
    return 0;
}

int cmd_bias_report(const Flags& flags) {
    const RunConfig cfg = load_config(flags);
    const auto dir = require_out(flags);
    const auto corpus = obtain_corpus(cfg, flags);

    TrainConfig salience_cfg = cfg.train;
    salience_cfg.supervision = Supervision::Salience;
    TrainConfig discrete_cfg = cfg.train;
    discrete_cfg.supervision = Supervision::Discrete;

    Model salience_model = Model::init(cfg.model, cfg.model_seed);
    Model discrete_model = Model::init(cfg.model, cfg.model_seed);
    train_salience(salience_model, corpus, salience_cfg);
    train_salience(discrete_model, corpus, discrete_cfg);

    const auto sal = evaluate_selection_bias(salience_model, corpus);
    const auto dis = evaluate_selection_bias(discrete_model, corpus);

    std::ostringstream csv;
    csv << "metric,scale_class,value\n";
    csv.precision(17);
    auto emit = [&csv](const char* supervision,
                       const std::map<ScaleClass, CoverageStats>& stats) {
        for (const auto& [cls, s] : stats) {
            csv << "coverage_" << supervision << "," << scale_class_name(cls) << ","
                << s.coverage << "\n";
            csv << "queries_per_object_" << supervision << "," << scale_class_name(cls) << ","
                << s.queries_per_object << "\n";
        }
    };
    emit("salience", sal);
    emit("discrete", dis);
    write_text_file((dir / "bias.csv").string(), csv.str());
    record_config(dir, cfg);

    const auto small_sal = sal.find(ScaleClass::Small);
    const auto small_dis = dis.find(ScaleClass::Small);
    if (small_sal != sal.end() && small_dis != dis.end())
        std::cout << "small coverage: salience=" << small_sal->second.coverage
                  << " discrete=" << small_dis->second.coverage << "\n";
    std::cout << "wrote " << (dir / "bias.csv").string() << "\n";
    return 0;
}

int cmd_init(const Flags& flags) {
    const RunConfig cfg = load_config(flags);
    const auto dir = require_out(flags);
    const SyntheticScene scene = generate_scene(scene_seed_of(cfg, flags), cfg.scene);
    const Model model = make_model(cfg, flags);
    const EncodeResult encoded = encode_scene(scene, model);
    const std::vector<Selection> picks =
        two_stage_initialize(encoded.queries, encoded.salience, cfg.model.top_k,
                             cfg.model.nms_threshold, cfg.model.redundancy_enabled,
                             cfg.model.strides);
    json out = json::array();
    for (const Selection& s : picks)
        out.push_back({{"level", s.pos.level}, {"i", s.pos.i}, {"j", s.pos.j},
                       {"score", s.score}});
    write_text_file((dir / "queries.json").string(), out.dump(2) + "\n");
    record_config(dir, cfg);
    std::cout << "kept " << picks.size() << " of " << cfg.model.top_k
              << " requested queries\n";
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"salience-guided query filtering encoder toolkit"};
    app.require_subcommand(1);

    Flags flags;
    auto add_common = [&flags](CLI::App* cmd, bool with_checkpoint, bool with_scene_seed) {
        cmd->add_option("--config", flags.config_path, "JSON config file");
        cmd->add_option("--out", flags.out_dir, "output directory");
        cmd->add_option("--seed", flags.seed, "override corpus/model/train seeds")
            ->each([&flags](const std::string&) { flags.seed_set = true; });
        cmd->add_option("--ratios", flags.ratios, "v1,v2,...:w1,w2,... filtering ratios");
        cmd->add_option("--nms-threshold", flags.nms_threshold, "redundancy IoU threshold");
        cmd->add_option("--embedding", flags.embedding, "relative|absolute|none");
        cmd->add_option("--supervision", flags.supervision, "salience|discrete");
        cmd->add_option("--redundancy", flags.redundancy, "on|off");
        cmd->add_option("--fusion", flags.fusion, "on|off");
        if (with_checkpoint)
            cmd->add_option("--checkpoint", flags.checkpoint,
                            "checkpoint base path (no extension)");
        if (with_scene_seed)
            cmd->add_option("--scene-seed", flags.scene_seed, "seed of the scene to process")
                ->each([&flags](const std::string&) { flags.scene_seed_set = true; });
    };

    CLI::App* gen = app.add_subcommand("gen", "generate a synthetic scene corpus");
    add_common(gen, false, false);
    gen->add_option("--scenes", flags.scenes, "number of scenes");

    CLI::App* train = app.add_subcommand("train", "train the salience predictor");
    add_common(train, true, false);
    train->add_option("--corpus", flags.corpus_path, "existing corpus.jsonl");

    CLI::App* select = app.add_subcommand("select", "emit a query filtering plan");
    add_common(select, true, true);

    CLI::App* cost = app.add_subcommand("cost", "print the analytic cost model as CSV");
    add_common(cost, false, false);

    CLI::App* heatmap = app.add_subcommand("heatmap", "export salience heatmaps as PGM");
    add_common(heatmap, true, true);

    CLI::App* bias = app.add_subcommand("bias-report", "train both supervisions, report coverage");
    add_common(bias, false, false);
    bias->add_option("--corpus", flags.corpus_path, "existing corpus.jsonl");

    CLI::App* init = app.add_subcommand("init", "emit two-stage initialization queries");
    add_common(init, true, true);
    init->add_option("--topk", flags.top_k, "candidate count before redundancy removal");

    std::vector<std::string> argv_store;
    argv_store.push_back("salenc");
    for (const std::string& a : args) argv_store.push_back(a);
    std::vector<const char*> argv;
    for (const std::string& a : argv_store) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) return cmd_gen(flags);
        if (train->parsed()) return cmd_train(flags);
        if (select->parsed()) return cmd_select(flags);
        if (cost->parsed()) return cmd_cost(flags);
        if (heatmap->parsed()) return cmd_heatmap(flags);
        if (bias->parsed()) return cmd_bias_report(flags);
        if (init->parsed()) return cmd_init(flags);
        std::cerr << "no subcommand given\n";
        return 1;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace salenc
