#include "screekit/detecteval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "screekit/error.hpp"

namespace screekit {

namespace {

constexpr double kRangeSlack = 1e-6;

struct ClassScores {
  std::vector<double> precision_at;  // one entry per IoU threshold
  std::vector<double> ap_at;
  DetectionCounts counts50;
  PrecisionRecall pr50;
};

bool known_class(const AnnotationSet& gt, int class_id) {
  if (class_id < 0) return false;
  if (gt.class_names.empty()) return true;
  return static_cast<std::size_t>(class_id) < gt.class_names.size();
}

std::string class_label(const AnnotationSet& gt, int class_id) {
  if (class_id >= 0 && static_cast<std::size_t>(class_id) < gt.class_names.size()) {
    return gt.class_names[static_cast<std::size_t>(class_id)];
  }
  return "class " + std::to_string(class_id);
}

// All-point interpolated average precision of a ranked TP/FP list.
double average_precision(const std::vector<std::pair<double, bool>>& ranked, std::size_t n_gt) {
  if (n_gt == 0) return 0.0;
  std::vector<double> precision;
  std::vector<double> recall;
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (const auto& [conf, is_tp] : ranked) {
    (is_tp ? tp : fp) += 1;
    precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(n_gt));
  }
  for (std::size_t k = precision.size(); k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t k = 0; k < precision.size(); ++k) {
    ap += (recall[k] - prev_recall) * precision[k];
    prev_recall = recall[k];
  }
  return ap;
}

}  // namespace

std::vector<std::string> default_class_names() {
  return {"Cerastium",           "Geum reptans",       "Papaver alpinum",
          "Ranunculus glacialis", "Saxifraga bryoides", "Luzula alpinopilosa"};
}

double iou(const BBox& a, const BBox& b) {
  const double iw = std::min(a.x1(), b.x1()) - std::max(a.x0(), b.x0());
  const double ih = std::min(a.y1(), b.y1()) - std::max(a.y0(), b.y0());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.w * a.h + b.w * b.h - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

BBox parse_yolo_line(const std::string& text, AnnotationKind kind, const std::string& source, std::size_t line) {
  std::istringstream fields(text);
  std::vector<std::string> tok;
  for (std::string s; fields >> s;) tok.push_back(s);
  const std::size_t expected = kind == AnnotationKind::gt ? 5 : 6;
  if (tok.size() != expected) {
    throw ParseError(source, line, "", "expected " + std::to_string(expected) + " fields (class cx cy w h" +
                                           (kind == AnnotationKind::pred ? " conf" : "") + "), got " +
                                           std::to_string(tok.size()));
  }
  auto number = [&](std::size_t i, const char* name) {
    try {
      std::size_t used = 0;
      const double v = std::stod(tok[i], &used);
      if (used != tok[i].size() || !std::isfinite(v)) throw std::invalid_argument(name);
      return v;
    } catch (const std::exception&) {
      throw ParseError(source, line, name, "not a number: " + tok[i]);
    }
  };
  BBox b;
  const double cls = number(0, "class");
  if (cls < 0.0 || cls != std::floor(cls)) throw ParseError(source, line, "class", "class id must be a non-negative integer");
  b.class_id = static_cast<int>(cls);
  b.cx = number(1, "cx");
  b.cy = number(2, "cy");
  b.w = number(3, "w");
  b.h = number(4, "h");
  const std::array<std::pair<const char*, double>, 4> coords = {
      {{"cx", b.cx}, {"cy", b.cy}, {"w", b.w}, {"h", b.h}}};
  for (const auto& [name, v] : coords) {
    if (v < -kRangeSlack || v > 1.0 + kRangeSlack) throw ParseError(source, line, name, "value outside [0, 1]");
  }
  if (!(b.w > 0.0) || !(b.h > 0.0)) throw ParseError(source, line, "w", "box width and height must be > 0");
  if (kind == AnnotationKind::pred) {
    const double conf = number(5, "conf");
    if (conf < -kRangeSlack || conf > 1.0 + kRangeSlack) throw ParseError(source, line, "conf", "value outside [0, 1]");
    b.confidence = std::clamp(conf, 0.0, 1.0);
  }
  return b;
}

AnnotationSet load_yolo_txt(const std::filesystem::path& dir, AnnotationKind kind) {
  if (!std::filesystem::is_directory(dir)) throw ParseError(dir.string(), 0, "", "not a directory");
  AnnotationSet set;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), 0, "", "cannot open annotation file");
    if (path.filename() == "classes.txt") {
      for (std::string name; std::getline(in, name);) {
        while (!name.empty() && (name.back() == '\r' || name.back() == ' ')) name.pop_back();
        if (!name.empty()) set.class_names.push_back(name);
      }
      continue;
    }
    auto& boxes = set.images[path.stem().string()];
    std::string text;
    std::size_t line_no = 0;
    while (std::getline(in, text)) {
      ++line_no;
      if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
      boxes.push_back(parse_yolo_line(text, kind, path.string(), line_no));
    }
  }
  if (set.class_names.empty()) set.class_names = default_class_names();
  return set;
}

void write_yolo_txt(const std::filesystem::path& dir, const AnnotationSet& set, AnnotationKind kind) {
  std::filesystem::create_directories(dir);
  if (!set.class_names.empty() && set.class_names != default_class_names()) {
    std::ofstream names(dir / "classes.txt");
    for (const auto& n : set.class_names) names << n << '\n';
    if (!names) fail(ErrorKind::parse, "cannot write class names in " + dir.string());
  }
  for (const auto& [image, boxes] : set.images) {
    std::ofstream out(dir / (image + ".txt"));
    if (!out) fail(ErrorKind::parse, "cannot write annotations for " + image);
    for (const auto& b : boxes) {
      out << fmt::format("{} {} {} {} {}", b.class_id, b.cx, b.cy, b.w, b.h);
      if (kind == AnnotationKind::pred) out << fmt::format(" {}", b.confidence.value_or(1.0));
      out << '\n';
    }
  }
}

MatchResult match_detections(const AnnotationSet& gt, const AnnotationSet& pred, double iou_threshold,
                             double min_confidence) {
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) fail(ErrorKind::usage, "IoU threshold must lie in (0, 1)");
  MatchResult result;
  std::set<std::string> ids;
  for (const auto& [id, _] : gt.images) ids.insert(id);
  for (const auto& [id, _] : pred.images) ids.insert(id);
  static const std::vector<BBox> kEmpty;

  for (const auto& id : ids) {
    const auto git = gt.images.find(id);
    const auto pit = pred.images.find(id);
    const auto& gts = git == gt.images.end() ? kEmpty : git->second;
    const auto& preds = pit == pred.images.end() ? kEmpty : pit->second;

    std::set<int> classes;
    for (const auto& b : gts) classes.insert(b.class_id);
    for (const auto& b : preds) classes.insert(b.class_id);

    for (int cls : classes) {
      std::vector<std::size_t> g_idx;
      for (std::size_t i = 0; i < gts.size(); ++i) {
        if (gts[i].class_id == cls) g_idx.push_back(i);
      }
      struct Candidate {
        std::size_t index;
        double confidence;
        double best_iou;
      };
      std::vector<Candidate> cands;
      for (std::size_t i = 0; i < preds.size(); ++i) {
        const auto& p = preds[i];
        if (p.class_id != cls) continue;
        const double conf = p.confidence.value_or(1.0);
        if (conf < min_confidence) continue;
        double best = 0.0;
        for (std::size_t g : g_idx) best = std::max(best, iou(p, gts[g]));
        cands.push_back({i, conf, best});
      }
      std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        if (a.best_iou != b.best_iou) return a.best_iou > b.best_iou;
        return a.index < b.index;
      });

      DetectionCounts& counts = result.per_class[cls];
      const bool known = known_class(gt, cls);
      std::vector<bool> taken(g_idx.size(), false);
      for (const auto& c : cands) {
        PredictionMatch m{id, c.index, cls, c.confidence, std::nullopt, 0.0};
        if (known) {
          std::optional<std::size_t> best;
          double best_iou = -1.0;
          for (std::size_t k = 0; k < g_idx.size(); ++k) {
            if (taken[k]) continue;
            const double v = iou(preds[c.index], gts[g_idx[k]]);
            if (v + kIouSlack >= iou_threshold && v > best_iou) {
              best_iou = v;
              best = k;
            }
          }
          if (best) {
            taken[*best] = true;
            m.gt_index = g_idx[*best];
            m.iou = best_iou;
          }
        } else {
          ++result.unknown_class_predictions;
        }
        if (m.gt_index) {
          ++counts.tp;
        } else {
          ++counts.fp;
        }
        result.predictions.push_back(std::move(m));
      }
      for (bool t : taken) {
        if (!t) ++counts.fn;
      }
    }
  }
  for (const auto& [cls, c] : result.per_class) {
    result.total.tp += c.tp;
    result.total.fp += c.fp;
    result.total.fn += c.fn;
  }
  return result;
}

PrecisionRecall precision_recall(const DetectionCounts& c) {
  PrecisionRecall pr;
  if (c.tp + c.fp == 0) {
    pr.precision_undefined = true;
  } else {
    pr.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  }
  if (c.tp + c.fn == 0) {
    pr.recall_undefined = true;
  } else {
    pr.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  }
  return pr;
}

std::vector<double> coco_iou_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back((50.0 + 5.0 * i) / 100.0);
  return t;
}

EvalReport map_scores(const AnnotationSet& gt, const AnnotationSet& pred, MapMode mode, double min_confidence) {
  EvalReport report;
  report.mode = mode;
  report.iou_thresholds = coco_iou_thresholds();

  std::map<int, std::size_t> gt_per_class;
  for (const auto& [id, boxes] : gt.images) {
    for (const auto& b : boxes) ++gt_per_class[b.class_id];
  }

  std::map<int, ClassScores> scores;
  for (const auto& [cls, n] : gt_per_class) scores[cls];

  DetectionCounts total50;
  std::size_t unknown = 0;
  for (std::size_t k = 0; k < report.iou_thresholds.size(); ++k) {
    const double thr = report.iou_thresholds[k];
    const MatchResult m = match_detections(gt, pred, thr, min_confidence);
    if (k == 0) {
      total50 = m.total;
      unknown = m.unknown_class_predictions;
    }
    for (auto& [cls, sc] : scores) {
      const auto it = m.per_class.find(cls);
      const DetectionCounts c = it == m.per_class.end() ? DetectionCounts{0, 0, gt_per_class[cls]} : it->second;
      const PrecisionRecall pr = precision_recall(c);
      if (k == 0) {
        sc.counts50 = c;
        sc.pr50 = pr;
      }
      sc.precision_at.push_back(pr.precision);
      if (mode == MapMode::pr_curve) {
        std::vector<std::pair<double, bool>> ranked;
        for (const auto& p : m.predictions) {
          if (p.class_id == cls) ranked.emplace_back(p.confidence, p.gt_index.has_value());
        }
        std::stable_sort(ranked.begin(), ranked.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        sc.ap_at.push_back(average_precision(ranked, gt_per_class[cls]));
      }
    }
  }
  if (unknown > 0) {
    report.warnings.push_back(std::to_string(unknown) +
                              " prediction(s) carry a class id outside the class dictionary; counted as false positives");
  }

  for (const auto& [cls, sc] : scores) {
    EvalRow row;
    row.class_id = cls;
    row.name = class_label(gt, cls);
    row.precision = sc.pr50.precision;
    row.recall = sc.pr50.recall;
    row.precision_undefined = sc.pr50.precision_undefined;
    row.recall_undefined = sc.pr50.recall_undefined;
    row.counts = sc.counts50;
    const auto& per_thr = mode == MapMode::pr_curve ? sc.ap_at : sc.precision_at;
    row.map50 = per_thr.front();
    row.map50_95 = std::accumulate(per_thr.begin(), per_thr.end(), 0.0) / static_cast<double>(per_thr.size());
    report.classes.push_back(row);
  }

  EvalRow& all = report.all;
  all.name = "All";
  all.counts = total50;
  all.precision_undefined = true;
  all.recall_undefined = true;
  if (!report.classes.empty()) {
    const double n = static_cast<double>(report.classes.size());
    for (const auto& row : report.classes) {
      all.precision_undefined = all.precision_undefined && row.precision_undefined;
      all.recall_undefined = all.recall_undefined && row.recall_undefined;
      all.precision += row.precision;
      all.recall += row.recall;
      all.map50 += row.map50;
      all.map50_95 += row.map50_95;
    }
    all.precision /= n;
    all.recall /= n;
    all.map50 /= n;
    all.map50_95 /= n;
  }
  return report;
}

std::string render_table(const EvalReport& report) {
  std::string out = fmt::format("{:<28} {:>9} {:>9} {:>9} {:>9}\n", "Class", "Precision", "Recall", "mAP50", "mAP50-95");
  auto row_line = [](const EvalRow& r) {
    const std::string p = r.precision_undefined ? fmt::format("{:.3f}*", r.precision) : fmt::format("{:.3f}", r.precision);
    const std::string rc = r.recall_undefined ? fmt::format("{:.3f}*", r.recall) : fmt::format("{:.3f}", r.recall);
    return fmt::format("{:<28} {:>9} {:>9} {:>9.3f} {:>9.3f}\n", r.name, p, rc, r.map50, r.map50_95);
  };
  out += row_line(report.all);
  for (const auto& r : report.classes) out += row_line(r);
  bool flagged = report.all.precision_undefined || report.all.recall_undefined;
  for (const auto& r : report.classes) flagged = flagged || r.precision_undefined || r.recall_undefined;
  if (flagged) out += "* undefined (zero denominator), reported as 0\n";
  return out;
}

}  // namespace screekit
