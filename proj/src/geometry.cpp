#include "salenc/geometry.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace salenc {

BBox BBox::from_corners(double x0, double y0, double x1, double y1) {
    BBox b;
    b.cx = 0.5 * (x0 + x1);
    b.cy = 0.5 * (y0 + y1);
    b.w = x1 - x0;
    b.h = y1 - y0;
    return b;
}

std::pair<double, double> grid_to_image_coords(const GridPos& pos, int stride) {
    if (stride < 1) throw ContractError("grid_to_image_coords: stride must be >= 1");
    const double half = static_cast<double>(stride / 2);
    return {half + static_cast<double>(pos.i) * stride,
            half + static_cast<double>(pos.j) * stride};
}

double iou(const BBox& a, const BBox& b) {
    const double ix = std::min(a.x1(), b.x1()) - std::max(a.x0(), b.x0());
    const double iy = std::min(a.y1(), b.y1()) - std::max(a.y0(), b.y0());
    if (ix <= 0.0 || iy <= 0.0) return 0.0;
    const double inter = ix * iy;
    return inter / (a.area() + b.area() - inter);
}

std::vector<int> nms(const std::vector<BBox>& boxes, const std::vector<double>& scores,
                     double iou_threshold) {
    if (boxes.size() != scores.size()) {
        throw ContractError("nms: " + std::to_string(boxes.size()) + " boxes vs " +
                            std::to_string(scores.size()) + " scores");
    }
    std::vector<int> order(boxes.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (scores[static_cast<std::size_t>(a)] != scores[static_cast<std::size_t>(b)])
            return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
        return a < b;
    });
    std::vector<int> kept;
    for (int cand : order) {
        bool suppressed = false;
        for (int k : kept) {
            if (iou(boxes[static_cast<std::size_t>(cand)], boxes[static_cast<std::size_t>(k)]) >
                iou_threshold) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) kept.push_back(cand);
    }
    return kept;
}

BBox unit_box(const GridPos& pos) {
    return BBox::from_corners(pos.i - 1.0, pos.j - 1.0, pos.i + 1.0, pos.j + 1.0);
}

}  // namespace salenc
