#include "svs/metrics.hpp"

#include <cmath>

namespace svs {

ConfusionCounts confusion_from_masks(const Image8& pred, const Image8& truth,
                                     const Image8* region) {
  require(pred.h == truth.h && pred.w == truth.w,
          "confusion_from_masks: pred ", pred.h, "x", pred.w,
          " does not match truth ", truth.h, "x", truth.w);
  if (region)
    require(region->h == truth.h && region->w == truth.w,
            "confusion_from_masks: region ", region->h, "x", region->w,
            " does not match masks ", truth.h, "x", truth.w);
  ConfusionCounts c;
  for (Index i = 0; i < pred.h * pred.w; ++i) {
    if (region && !region->px[std::size_t(i)]) continue;
    const bool p = pred.px[std::size_t(i)] != 0;
    const bool t = truth.px[std::size_t(i)] != 0;
    if (p && t)
      ++c.tp;
    else if (!p && !t)
      ++c.tn;
    else if (p && !t)
      ++c.fp;
    else
      ++c.fn;
  }
  return c;
}

MetricsReport compute_metrics(const ConfusionCounts& c) {
  require(c.tp >= 0 && c.tn >= 0 && c.fp >= 0 && c.fn >= 0,
          "confusion counts must be non-negative");
  const double total = double(c.total());
  require(c.total() > 0, "compute_metrics: empty confusion counts");
  const double tp = double(c.tp), tn = double(c.tn), fp = double(c.fp),
               fn = double(c.fn);

  MetricsReport r;
  r.counts = c;
  r.accuracy = (tp + tn) / total;
  if (c.tp + c.fp > 0) {
    r.precision = tp / (tp + fp);
    r.fdr = fp / (tp + fp);
  }
  if (c.tp + c.fn > 0) r.recall = tp / (tp + fn);
  if (c.tn + c.fp > 0) r.specificity = tn / (tn + fp);
  if (r.precision && r.recall && *r.precision + *r.recall > 0.0)
    r.f1 = 2.0 * (*r.recall * *r.precision) / (*r.recall + *r.precision);
  if (r.recall && r.specificity) {
    r.auc = 0.5 * (*r.recall + *r.specificity);
    r.g_means = std::sqrt(*r.recall * *r.specificity);
  }
  r.pe = ((tp + fn) * (tp + fp) + (tn + fp) * (tn + fn)) / (total * total);
  if (*r.pe != 1.0) r.kappa = (*r.accuracy - *r.pe) / (1.0 - *r.pe);
  return r;
}

MetricsReport aggregate(const std::vector<ConfusionCounts>& corpus,
                        Aggregate mode) {
  require(!corpus.empty(), "aggregate: empty corpus");
  ConfusionCounts sum;
  for (const auto& c : corpus) sum += c;
  if (mode == Aggregate::micro) return compute_metrics(sum);

  std::vector<MetricsReport> reports;
  reports.reserve(corpus.size());
  for (const auto& c : corpus) reports.push_back(compute_metrics(c));
  MetricsReport out;
  out.counts = sum;
  auto mean_of = [&](std::optional<double> MetricsReport::*field) {
    double acc = 0.0;
    int n = 0;
    for (const auto& r : reports)
      if (r.*field) {
        acc += *(r.*field);
        ++n;
      }
    return n > 0 ? std::optional<double>(acc / n) : std::nullopt;
  };
  out.accuracy = mean_of(&MetricsReport::accuracy);
  out.precision = mean_of(&MetricsReport::precision);
  out.recall = mean_of(&MetricsReport::recall);
  out.specificity = mean_of(&MetricsReport::specificity);
  out.f1 = mean_of(&MetricsReport::f1);
  out.auc = mean_of(&MetricsReport::auc);
  out.fdr = mean_of(&MetricsReport::fdr);
  out.g_means = mean_of(&MetricsReport::g_means);
  out.kappa = mean_of(&MetricsReport::kappa);
  out.pe = mean_of(&MetricsReport::pe);
  return out;
}

nlohmann::json report_to_json(const MetricsReport& r) {
  nlohmann::json j;
  auto put = [&](const char* name, const std::optional<double>& v) {
    if (v)
      j[name] = *v;
    else
      j[name] = nullptr;
  };
  put("accuracy", r.accuracy);
  put("precision", r.precision);
  put("recall", r.recall);
  put("specificity", r.specificity);
  put("f1", r.f1);
  put("auc", r.auc);
  put("fdr", r.fdr);
  put("g_means", r.g_means);
  put("kappa", r.kappa);
  put("pe", r.pe);
  j["counts"] = {{"tp", r.counts.tp},
                 {"tn", r.counts.tn},
                 {"fp", r.counts.fp},
                 {"fn", r.counts.fn}};
  return j;
}

}  // namespace svs
