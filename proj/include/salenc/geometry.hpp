#pragma once

#include <utility>
#include <vector>

#include "salenc/common.hpp"

namespace salenc {

// axis-aligned box in center-size form, image pixel units
struct BBox {
    double cx = 0.0, cy = 0.0;
    double w = 0.0, h = 0.0;

    double x0() const { return cx - 0.5 * w; }
    double y0() const { return cy - 0.5 * h; }
    double x1() const { return cx + 0.5 * w; }
    double y1() const { return cy + 0.5 * h; }
    double area() const { return w * h; }
    double max_side() const { return w > h ? w : h; }

    static BBox from_corners(double x0, double y0, double x1, double y1);
    bool valid() const { return w > 0.0 && h > 0.0; }
};

// query position on one pyramid level
struct GridPos {
    int level = 0;
    int i = 0;  // maps to the first image coordinate
    int j = 0;
};

// (x, y) = (floor(s/2) + i*s, floor(s/2) + j*s)
std::pair<double, double> grid_to_image_coords(const GridPos& pos, int stride);

double iou(const BBox& a, const BBox& b);

// greedy descending-score suppression of any box with IoU strictly above
// the threshold against an already kept box; score ties keep the lower
// original index first; result is ordered by descending score
std::vector<int> nms(const std::vector<BBox>& boxes, const std::vector<double>& scores,
                     double iou_threshold);

// corner form [i-1, j-1, i+1, j+1] in grid-index units: center (i,j), side 2
BBox unit_box(const GridPos& pos);

}  // namespace salenc
