#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace screekit {

/// YOLO-normalized box: centre and size as fractions of the image.
struct BBox {
  int class_id = 0;
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;
  std::optional<double> confidence;  // predictions only

  [[nodiscard]] double x0() const { return cx - 0.5 * w; }
  [[nodiscard]] double x1() const { return cx + 0.5 * w; }
  [[nodiscard]] double y0() const { return cy - 0.5 * h; }
  [[nodiscard]] double y1() const { return cy + 0.5 * h; }
};

/// The six indicator species scored by default.
std::vector<std::string> default_class_names();

struct AnnotationSet {
  std::map<std::string, std::vector<BBox>> images;  // image id -> boxes, in file order
  std::vector<std::string> class_names;             // id -> name
};

double iou(const BBox& a, const BBox& b);

enum class AnnotationKind { gt, pred };

/// One `<image id>.txt` per image. Lines are `class cx cy w h` for ground truth
/// and `class cx cy w h conf` for predictions. A `classes.txt` file, when
/// present, is read as the class dictionary (one name per line).
AnnotationSet load_yolo_txt(const std::filesystem::path& dir, AnnotationKind kind);
void write_yolo_txt(const std::filesystem::path& dir, const AnnotationSet& set, AnnotationKind kind);

/// Parses one annotation line; throws ParseError with `source`/`line`.
BBox parse_yolo_line(const std::string& text, AnnotationKind kind, const std::string& source = {},
                     std::size_t line = 0);

struct DetectionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

struct PredictionMatch {
  std::string image;
  std::size_t index = 0;             // position in the image's prediction list
  int class_id = 0;
  double confidence = 0.0;
  std::optional<std::size_t> gt_index;  // matched ground-truth box, if TP
  double iou = 0.0;
};

struct MatchResult {
  std::map<int, DetectionCounts> per_class;
  DetectionCounts total;
  std::vector<PredictionMatch> predictions;
  std::size_t unknown_class_predictions = 0;
};

inline constexpr double kIouSlack = 1e-12;

/// Greedy one-to-one matching per image and class. Predictions are visited by
/// descending confidence (ties: higher best IoU, then file order) and take the
/// highest-IoU unmatched ground truth with IoU >= threshold. Predictions with a
/// class outside the dictionary are false positives. IoU comparisons allow
/// kIouSlack for rounding.
MatchResult match_detections(const AnnotationSet& gt, const AnnotationSet& pred, double iou_threshold,
                             double min_confidence = 0.0);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  bool precision_undefined = false;  // TP + FP == 0, reported as 0
  bool recall_undefined = false;     // TP + FN == 0, reported as 0
};

PrecisionRecall precision_recall(const DetectionCounts& counts);

enum class MapMode {
  paper_literal,  // mean precision at fixed IoU thresholds
  pr_curve,       // all-point interpolated area under the PR curve
};

struct EvalRow {
  std::string name;
  int class_id = -1;  // -1 for the aggregate row
  double precision = 0.0;
  double recall = 0.0;
  double map50 = 0.0;
  double map50_95 = 0.0;
  DetectionCounts counts;  // at IoU 0.5
  bool precision_undefined = false;
  bool recall_undefined = false;
};

struct EvalReport {
  MapMode mode = MapMode::paper_literal;
  std::vector<double> iou_thresholds;
  EvalRow all;
  std::vector<EvalRow> classes;  // classes present in ground truth, ascending id
  std::vector<std::string> warnings;
};

std::vector<double> coco_iou_thresholds();  // 0.50, 0.55, ..., 0.95

EvalReport map_scores(const AnnotationSet& gt, const AnnotationSet& pred, MapMode mode = MapMode::paper_literal,
                      double min_confidence = 0.0);

/// Fixed-width text table with columns Class, Precision, Recall, mAP50, mAP50-95.
std::string render_table(const EvalReport& report);

}  // namespace screekit
