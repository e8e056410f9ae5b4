#include "dpn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

namespace dpn {

double relative_translation_error(const Pose& pred, const Pose& gt) {
  return (pred.t - gt.t).norm() / gt.s.norm();
}

PairErrors pair_errors(const Pose& pred, const Pose& gt, const SymmetrySpec& sym) {
  return {iou3d(OrientedBox::from_pose(pred), OrientedBox::from_pose(gt)), rotation_error_deg(pred.R, gt.R, sym),
          relative_translation_error(pred, gt), (pred.t - gt.t).norm()};
}

double average_precision(const std::vector<Detection>& detections, const std::vector<GroundTruth>& gts,
                         const MatchPredicate& predicate) {
  if (gts.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].confidence > detections[b].confidence;
  });

  std::vector<bool> used(gts.size(), false);
  std::vector<double> precision, recall;
  double tp = 0.0, fp = 0.0;
  for (std::size_t di : order) {
    const auto& det = detections[di];
    const auto det_box = OrientedBox::from_pose(det.pose);
    int best = -1;
    double best_iou = -1.0;
    for (std::size_t gi = 0; gi < gts.size(); ++gi) {
      if (used[gi] || gts[gi].scene != det.scene) continue;
      const double iou = iou3d(det_box, OrientedBox::from_pose(gts[gi].pose));
      if (iou > best_iou) {
        best_iou = iou;
        best = static_cast<int>(gi);
      }
    }
    if (best >= 0 && predicate(pair_errors(det.pose, gts[best].pose, gts[best].symmetry))) {
      used[best] = true;
      tp += 1.0;
    } else {
      fp += 1.0;
    }
    precision.push_back(tp / (tp + fp));
    recall.push_back(tp / static_cast<double>(gts.size()));
  }

  // All-point interpolation: precision envelope, summed over recall steps.
  std::vector<double> mrec{0.0}, mpre{0.0};
  mrec.insert(mrec.end(), recall.begin(), recall.end());
  mpre.insert(mpre.end(), precision.begin(), precision.end());
  mrec.push_back(1.0);
  mpre.push_back(0.0);
  for (std::size_t i = mpre.size() - 1; i > 0; --i) mpre[i - 1] = std::max(mpre[i - 1], mpre[i]);
  double ap = 0.0;
  for (std::size_t i = 1; i < mrec.size(); ++i) ap += (mrec[i] - mrec[i - 1]) * mpre[i];
  return ap;
}

bool MetricCell::accepts(const PairErrors& e) const {
  if (iou >= 0.0 && !(e.iou >= iou)) return false;
  if (rotation_deg >= 0.0 && !(e.rotation_deg <= rotation_deg)) return false;
  if (relative_translation >= 0.0 && !(e.relative_translation <= relative_translation)) return false;
  if (translation_m >= 0.0 && !(e.translation_m <= translation_m)) return false;
  return true;
}

namespace {

std::string pct(double v) { return std::to_string(static_cast<int>(std::lround(v * 100.0))); }
std::string deg(double v) { return std::to_string(static_cast<int>(std::lround(v))); }

MetricCell combined(double iou, double rot, double rel) {
  return {"IoU" + pct(iou) + "_" + deg(rot) + "deg_" + pct(rel) + "pct", iou, rot, rel, -1.0};
}

}  // namespace

std::vector<MetricCell> MetricGrid::cells() const {
  // Combined columns pair the strict IoU with the tight translation bands and
  // the loose IoU with the wider ones.
  const double lo_iou = iou.front(), hi_iou = iou.back();
  const double r1 = rotation_deg.front(), r2 = rotation_deg.back();
  const double t1 = relative_translation[0], t2 = relative_translation[1], t3 = relative_translation[2];
  std::vector<MetricCell> out{combined(hi_iou, r1, t1), combined(hi_iou, r2, t1), combined(hi_iou, r1, t2),
                              combined(lo_iou, r1, t3), combined(lo_iou, r2, t2), combined(lo_iou, r2, t3)};
  for (double v : iou) out.push_back({"IoU" + pct(v), v, -1.0, -1.0, -1.0});
  for (const auto& [r, t] : absolute) {
    out.push_back({deg(r) + "deg_" + std::to_string(static_cast<int>(std::lround(t * 100.0))) + "cm", -1.0, r, -1.0, t});
  }
  return out;
}

MapTable map_table(const std::map<std::string, CategoryResults>& results, const MetricGrid& grid) {
  MapTable table;
  for (const auto& cell : grid.cells()) {
    double acc = 0.0;
    int n = 0;
    for (const auto& [category, r] : results) {
      const double ap = average_precision(r.detections, r.ground_truths,
                                          [&cell](const PairErrors& e) { return cell.accepts(e); });
      if (std::isnan(ap)) continue;
      acc += ap;
      ++n;
    }
    table.columns.push_back(cell.name);
    table.values.push_back(n ? 100.0 * acc / n : 0.0);
  }
  return table;
}

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

void write_map_csv(std::ostream& out, const std::vector<std::pair<std::string, MapTable>>& rows) {
  if (rows.empty()) return;
  out << "method";
  for (const auto& c : rows.front().second.columns) out << ',' << c;
  out << '\n';
  for (const auto& [method, table] : rows) {
    out << method;
    for (double v : table.values) out << ',' << fixed(v, 6);
    out << '\n';
  }
}

void print_map_table(std::ostream& out, const std::vector<std::pair<std::string, MapTable>>& rows) {
  if (rows.empty()) return;
  std::size_t first = 6;
  for (const auto& [method, t] : rows) first = std::max(first, method.size());
  std::vector<std::size_t> widths;
  for (const auto& c : rows.front().second.columns) widths.push_back(std::max<std::size_t>(c.size(), 6));
  auto pad = [](const std::string& s, std::size_t w) { return std::string(w - std::min(w, s.size()), ' ') + s; };
  out << pad("method", first);
  for (std::size_t i = 0; i < widths.size(); ++i) out << "  " << pad(rows.front().second.columns[i], widths[i]);
  out << '\n';
  for (const auto& [method, t] : rows) {
    out << pad(method, first);
    for (std::size_t i = 0; i < widths.size(); ++i) out << "  " << pad(fixed(t.values[i], 1), widths[i]);
    out << '\n';
  }
}

}  // namespace dpn
