#include "shotvalue/esv.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <tuple>

#include "shotvalue/error.hpp"

namespace shotvalue {

using Eigen::VectorXd;

void McConfig::validate() const {
  if (n_samples < 1) throw InvalidArgument("n_samples must be at least 1");
  if (batch < 1) throw InvalidArgument("batch size must be at least 1");
}

EsvEstimate summarize(std::span<const FutureValue> values, std::span<const double> weights) {
  if (values.empty()) throw InvalidArgument("no futures to summarize");
  if (!weights.empty() && weights.size() != values.size()) {
    throw InvalidArgument("weight and value counts differ");
  }
  auto w = [&](std::size_t i) { return weights.empty() ? 1.0 : weights[i]; };
  auto value = [&](std::size_t i) { return values[i].error ? 0.0 : values[i].value; };
  // Accumulate around the first value so a constant integrand gives se = 0 exactly.
  const double shift = value(0);
  double sw = 0.0, sw2 = 0.0, swd = 0.0, swe = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double wi = w(i);
    if (!(wi >= 0.0) || !std::isfinite(wi)) throw InvalidArgument("weights must be finite and non-negative");
    const double v = value(i);
    if (!(v >= 0.0 && v <= 1.0)) throw NumericError("future value outside [0, 1]");
    sw += wi;
    sw2 += wi * wi;
    swd += wi * (v - shift);
    swe += values[i].error ? wi : 0.0;
  }
  if (!(sw > 0.0)) throw InvalidArgument("weights sum to zero");
  const double mean_shift = swd / sw;
  double ss = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = value(i) - shift - mean_shift;
    ss += w(i) * w(i) * d * d;
  }
  EsvEstimate e;
  e.n = values.size();
  e.mean = shift + mean_shift;
  e.error_fraction = swe / sw;
  const double denom = 1.0 - sw2 / (sw * sw);
  e.se = denom > 0.0 ? std::sqrt(ss / denom) / sw : 0.0;
  return e;
}

EsvEstimate monte_carlo(const ConditionedMixture& mixture, const Valuer& valuer, const McConfig& mc,
                        std::span<const int> pinned_indices, const VectorXd* pinned_values) {
  mc.validate();
  if (!pinned_indices.empty() && (pinned_values == nullptr || pinned_values->size() != mixture.dim)) {
    throw InvalidArgument("pinned coordinates need values of the mixture dimension");
  }
  std::vector<FutureValue> values(mc.n_samples);
  for (std::size_t start = 0; start < mc.n_samples; start += mc.batch) {
    const std::size_t end = std::min(mc.n_samples, start + mc.batch);
    for (std::size_t i = start; i < end; ++i) {
      VectorXd future = sample_future(mixture, mc.seed, i);
      for (int k : pinned_indices) future(k) = (*pinned_values)(k);
      values[i] = valuer(future);
    }
  }
  return summarize(values);
}

EsvEstimate esv_at(const ObservationSet& observations, const MixtureModel& mixture, const Valuer& valuer,
                   const McConfig& mc) {
  if (observations.dim() != mixture.dim()) {
    throw InvalidArgument("observation dimension " + std::to_string(observations.dim()) +
                          " does not match the mixture dimension " + std::to_string(mixture.dim()));
  }
  return monte_carlo(condition_mixture(mixture, observations), valuer, mc);
}

FutureValue value_encoding(const VectorXd& encoding, const ShotContext& context, const OutcomeModel& model) {
  try {
    const FunctionalEncoding enc(context.flag, encoding);
    if (classify_error(enc, context.shot_type, context.geometry, context.horizon)) return {0.0, true};
    const ShotFeatures f = extract_features(enc, context.receiver_hand, context.shot_type, context.horizon);
    const VectorXd x = feature_vector(f);
    if (!x.allFinite()) return {0.0, true};
    return {predict_win(model, x), false};
  } catch (const GeometryError&) {
    return {0.0, true};
  }
}

Valuer shot_valuer(const ShotContext& context, const OutcomeModel& model) {
  return [context, &model](const VectorXd& future) { return value_encoding(future, context, model); };
}

EsvEstimate esv_at(const ObservationSet& observations, const MixtureModel& mixture, const OutcomeModel& model,
                   const ShotContext& context, const McConfig& mc) {
  return esv_at(observations, mixture, shot_valuer(context, model), mc);
}

namespace {

void check_match(const FunctionalEncoding& enc, const ShotContext& context, const MixtureModel& mixture) {
  if (enc.values.size() != enc.layout().dim()) throw InvalidArgument("encoding length does not match its layout");
  if (enc.flag != context.flag) throw InvalidArgument("shot context and encoding disagree on the bounce flag");
  if (mixture.dim() != enc.layout().dim()) {
    throw InvalidArgument("mixture dimension " + std::to_string(mixture.dim()) + " does not match the " +
                          std::string(to_string(enc.flag)) + " layout");
  }
}

}  // namespace

EsvEstimate vast(const FunctionalEncoding& encoding, const ShotContext& context, const MixtureModel& mixture,
                 const OutcomeModel& model, const McConfig& mc, ReceiverMarginal marginal) {
  check_match(encoding, context, mixture);
  const auto& fixed = encoding.layout().shooter_set();
  ObservationSet obs(mixture.dim());
  if (marginal == ReceiverMarginal::conditional) {
    for (int i : fixed) obs.add_unit(i, encoding.values(i), 0.0);
  }
  return monte_carlo(condition_mixture(mixture, obs), shot_valuer(context, model), mc, fixed, &encoding.values);
}

ObservationSet shot_iq_constraints(const FunctionalEncoding& encoding, double horizon) {
  const auto& layout = encoding.layout();
  if (encoding.flag != BounceFlag::one_bounce) throw InvalidArgument("Shot IQ needs a one-bounce shot");
  ObservationSet obs(layout.dim());
  for (int i : layout.shot_iq_fixed()) obs.add_unit(i, encoding.values(i), 0.0);
  const double t1 = bounce_location(encoding, horizon).t;
  for (Axis a : {Axis::x, Axis::y, Axis::z}) {
    LinearConstraint c;
    c.row = VectorXd::Zero(layout.dim());
    double p = 1.0;
    for (int k = 0; k < 4; ++k, p *= t1) c.row(layout.ball(0, a, k)) = p;
    c.value = encoding.ball(0, a)(t1);
    obs.add(std::move(c));
  }
  return obs;
}

EsvEstimate shot_iq(const FunctionalEncoding& encoding, const ShotContext& context, const MixtureModel& mixture,
                    const OutcomeModel& model, const McConfig& mc) {
  check_match(encoding, context, mixture);
  const ObservationSet obs = shot_iq_constraints(encoding, context.horizon);
  return monte_carlo(condition_mixture(mixture, obs), shot_valuer(context, model), mc,
                     encoding.layout().shot_iq_fixed(), &encoding.values);
}

double pointwise_value(const FunctionalEncoding& encoding, const ShotContext& context, const OutcomeModel& model) {
  const FutureValue v = value_encoding(encoding.values, context, model);
  return v.error ? 0.0 : v.value;
}

VaccResult vacc(const FunctionalEncoding& encoding, const ShotContext& context, const MixtureModel& mixture,
                const OutcomeModel& model, const McConfig& mc, ReceiverMarginal marginal) {
  VaccResult r;
  r.vast = vast(encoding, context, mixture, model, mc, marginal);
  r.pointwise = pointwise_value(encoding, context, model);
  r.value = r.vast.mean - r.pointwise;
  return r;
}

namespace {

// Sum of sorted values, so the result does not depend on input order.
double ordered_mean(std::vector<double>& v) {
  std::sort(v.begin(), v.end());
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double standard_error(const std::vector<double>& sorted, double mean) {
  if (sorted.size() < 2) return 0.0;
  double ss = 0.0;
  for (double v : sorted) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(sorted.size() - 1) / static_cast<double>(sorted.size()));
}

}  // namespace

MetricReport aggregate(const std::vector<MetricSample>& samples, const AggregateOptions& options) {
  if (samples.empty()) throw InvalidArgument("no metric rows to aggregate");
  for (const auto& [metric, key] : options.keys) {
    if (key != "shooter_id" && key != "receiver_id") {
      throw InvalidArgument("unknown grouping key '" + key + "' for metric " + metric);
    }
  }
  auto key_of = [&](const std::string& metric) -> const std::string& {
    for (const auto& [m, k] : options.keys) {
      if (m == metric) return k;
    }
    throw InvalidArgument("no grouping key for metric '" + metric + "'");
  };
  auto is_centered = [&](const std::string& metric) {
    return std::find(options.centered.begin(), options.centered.end(), metric) != options.centered.end();
  };

  using GroupKey = std::tuple<std::string, int, std::string>;
  std::map<GroupKey, std::vector<double>> groups;
  std::map<std::pair<std::string, int>, std::vector<double>> corpus;
  for (const auto& s : samples) {
    if (!std::isfinite(s.value)) throw InvalidArgument("non-finite metric value for shot " + s.shot_id);
    const std::string& player = key_of(s.metric) == "shooter_id" ? s.shooter_id : s.receiver_id;
    groups[{player, static_cast<int>(s.shot_type), s.metric}].push_back(s.value);
    if (is_centered(s.metric)) corpus[{s.metric, static_cast<int>(s.shot_type)}].push_back(s.value);
  }
  std::map<std::pair<std::string, int>, double> corpus_mean;
  for (auto& [k, v] : corpus) corpus_mean[k] = ordered_mean(v);

  MetricReport report;
  for (auto& [key, values] : groups) {
    const auto& [player, type, metric] = key;
    MetricRow row;
    row.player_id = player;
    row.shot_type = static_cast<ShotType>(type);
    row.n = values.size();
    const double mean = ordered_mean(values);
    row.se = standard_error(values, mean);
    row.mean = mean;
    row.metric = metric;
    if (is_centered(metric)) {
      row.mean = mean - corpus_mean.at({metric, type});
      row.metric = metric + "_over_average";
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

void write_metric_report_csv(std::ostream& out, const MetricReport& report) {
  out << "player_id,shot_type,metric,mean,se,n\n";
  for (const auto& r : report.rows) {
    out << r.player_id << ',' << to_string(r.shot_type) << ',' << r.metric << ',' << format_double(r.mean) << ','
        << format_double(r.se) << ',' << r.n << '\n';
  }
}

std::vector<HeatCell> heatmap(const std::vector<LocatedValue>& values, const GridSpec& grid) {
  if (!(grid.cell_size > 0.0) || !std::isfinite(grid.cell_size)) throw InvalidArgument("cell size must be positive");
  if (!(grid.x_max > grid.x_min) || !(grid.y_max > grid.y_min)) throw InvalidArgument("grid region is empty");
  auto cells_along = [&](double lo, double hi) {
    return std::max<long>(1, static_cast<long>(std::ceil((hi - lo) / grid.cell_size - 1e-9)));
  };
  const long nx = cells_along(grid.x_min, grid.x_max);
  const long ny = cells_along(grid.y_min, grid.y_max);
  if (nx * ny > 10'000'000) throw InvalidArgument("grid has too many cells");
  std::vector<double> sum(nx * ny, 0.0);
  std::vector<std::size_t> count(nx * ny, 0);
  for (const auto& v : values) {
    if (!std::isfinite(v.x) || !std::isfinite(v.y) || !std::isfinite(v.value)) {
      throw InvalidArgument("heat-map values must be finite");
    }
    if (v.x < grid.x_min || v.x > grid.x_max || v.y < grid.y_min || v.y > grid.y_max) continue;
    const long ix = std::min(nx - 1, static_cast<long>((v.x - grid.x_min) / grid.cell_size));
    const long iy = std::min(ny - 1, static_cast<long>((v.y - grid.y_min) / grid.cell_size));
    sum[iy * nx + ix] += v.value;
    ++count[iy * nx + ix];
  }
  std::vector<HeatCell> out;
  out.reserve(nx * ny);
  for (long iy = 0; iy < ny; ++iy) {
    for (long ix = 0; ix < nx; ++ix) {
      HeatCell c;
      c.x = grid.x_min + (static_cast<double>(ix) + 0.5) * grid.cell_size;
      c.y = grid.y_min + (static_cast<double>(iy) + 0.5) * grid.cell_size;
      c.count = count[iy * nx + ix];
      if (c.count > 0) c.mean = sum[iy * nx + ix] / static_cast<double>(c.count);
      out.push_back(c);
    }
  }
  return out;
}

void write_heatmap_csv(std::ostream& out, const std::vector<HeatCell>& cells) {
  out << "cell_x,cell_y,mean,count\n";
  for (const auto& c : cells) {
    out << format_double(c.x) << ',' << format_double(c.y) << ',' << (c.mean ? format_double(*c.mean) : "") << ','
        << c.count << '\n';
  }
}

}  // namespace shotvalue
