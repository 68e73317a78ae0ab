#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <vector>

#include "svs/image.hpp"

namespace svs {

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t tn = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;

  std::int64_t total() const { return tp + tn + fp + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    tn += o.tn;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  bool operator==(const ConfusionCounts&) const = default;
};

// The nine metric values for one mask pair or a corpus aggregate. A missing
// optional marks a zero-denominator case; macro means skip those images.
struct MetricsReport {
  std::optional<double> accuracy, precision, recall, specificity, f1, auc,
      fdr, g_means, kappa;
  std::optional<double> pe;  // chance agreement inside the kappa computation
  ConfusionCounts counts;    // micro: the summed counts; macro: informational
};

enum class Aggregate { micro, macro };

// Per-pixel tally; positive class = vessel (non-zero). When region is given
// only pixels inside it count.
ConfusionCounts confusion_from_masks(const Image8& pred, const Image8& truth,
                                     const Image8* region = nullptr);

MetricsReport compute_metrics(const ConfusionCounts& c);

// micro: metrics of the summed counts; macro: unweighted mean of per-image
// defined metrics, undefined entries excluded.
MetricsReport aggregate(const std::vector<ConfusionCounts>& corpus,
                        Aggregate mode);

nlohmann::json report_to_json(const MetricsReport& r);

}  // namespace svs
