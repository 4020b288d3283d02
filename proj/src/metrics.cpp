#include "dmlab/metrics.hpp"

#include "dmlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>
#include <vector>

namespace dmlab {

namespace {

void require_same(const BinaryMask& a, const BinaryMask& b) {
    if (!a.same_dims(b)) throw ShapeMismatch("metrics: mask dimensions differ");
}

}  // namespace

IouCounts pixel_iou(const BinaryMask& pred, const BinaryMask& gt) {
    require_same(pred, gt);
    IouCounts c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        c.inter += (pred[i] && gt[i]) ? 1 : 0;
        c.uni += (pred[i] || gt[i]) ? 1 : 0;
    }
    c.iou = c.uni == 0 ? 1.0 : static_cast<double>(c.inter) / static_cast<double>(c.uni);
    return c;
}

PdFaCounts pd_fa(const BinaryMask& pred, const BinaryMask& gt, double match_dist) {
    require_same(pred, gt);
    if (!(match_dist >= 0.0)) throw InvalidParameter("pd_fa: match distance must be non-negative");
    const auto pc = connected_components(pred);
    const auto gc = connected_components(gt);

    // Distances are compared on a 1e-9 pixel grid so that geometrically equal
    // distances tie exactly (and fall back to gt index, then pred index).
    std::vector<std::tuple<long long, std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < gc.size(); ++i) {
        for (std::size_t j = 0; j < pc.size(); ++j) {
            const double d = std::hypot(gc[i].cx - pc[j].cx, gc[i].cy - pc[j].cy);
            if (d <= match_dist) pairs.emplace_back(std::llround(d * 1e9), i, j);
        }
    }
    std::sort(pairs.begin(), pairs.end());

    std::vector<bool> gt_used(gc.size(), false);
    std::vector<bool> pred_used(pc.size(), false);
    PdFaCounts c;
    c.targets = gc.size();
    c.pixels = pred.size();
    for (const auto& [d, i, j] : pairs) {
        if (gt_used[i] || pred_used[j]) continue;
        gt_used[i] = true;
        pred_used[j] = true;
        ++c.correct;
    }
    for (std::size_t j = 0; j < pc.size(); ++j)
        if (!pred_used[j]) c.false_pixels += pc[j].area;
    return c;
}

MetricSet evaluate_set(std::span<const BinaryMask> preds, std::span<const BinaryMask> gts, double match_dist,
                       bool macro) {
    if (preds.size() != gts.size()) throw ShapeMismatch("evaluate_set: prediction and label counts differ");
    MetricSet m;
    m.images = preds.size();
    double iou_sum = 0.0;
    double pd_sum = 0.0;
    double fa_sum = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const auto iu = pixel_iou(preds[i], gts[i]);
        const auto pf = pd_fa(preds[i], gts[i], match_dist);
        m.inter += iu.inter;
        m.uni += iu.uni;
        m.correct += pf.correct;
        m.targets += pf.targets;
        m.false_pixels += pf.false_pixels;
        m.pixels += pf.pixels;
        iou_sum += iu.iou;
        pd_sum += pf.targets ? static_cast<double>(pf.correct) / static_cast<double>(pf.targets) : 1.0;
        fa_sum += pf.pixels ? static_cast<double>(pf.false_pixels) / static_cast<double>(pf.pixels) : 0.0;
    }
    if (macro && m.images > 0) {
        const auto n = static_cast<double>(m.images);
        m.iou = iou_sum / n;
        m.pd = pd_sum / n;
        m.fa = fa_sum / n;
        return m;
    }
    m.iou = m.uni ? static_cast<double>(m.inter) / static_cast<double>(m.uni) : 1.0;
    m.pd = m.targets ? static_cast<double>(m.correct) / static_cast<double>(m.targets) : 1.0;
    m.fa = m.pixels ? static_cast<double>(m.false_pixels) / static_cast<double>(m.pixels) : 0.0;
    return m;
}

}  // namespace dmlab
