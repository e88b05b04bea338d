#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "shotvalue/conditioning.hpp"
#include "shotvalue/dpgmm.hpp"
#include "shotvalue/outcome.hpp"

namespace shotvalue {

struct McConfig {
  std::size_t n_samples = 1000;
  std::uint64_t seed = 0;
  std::size_t batch = 256;  // futures materialized at a time

  void validate() const;
};

struct EsvEstimate {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
  double error_fraction = 0.0;
};

// Value of one sampled future; error-class futures are worth zero.
struct FutureValue {
  double value = 0.0;
  bool error = false;
};

using Valuer = std::function<FutureValue(const Eigen::VectorXd& future)>;

// Weighted mean and standard error of the values. With uniform weights the
// standard error is the sample standard deviation over sqrt(n).
EsvEstimate summarize(std::span<const FutureValue> values, std::span<const double> weights = {});

// Averages the valuer over futures drawn from the conditioned mixture.
// Future i uses substream i of mc.seed, and the reduction runs in index
// order, so the result does not depend on the batch size. pinned, when
// given, overwrites the listed coordinates of every future.
EsvEstimate monte_carlo(const ConditionedMixture& mixture, const Valuer& valuer, const McConfig& mc,
                        std::span<const int> pinned_indices = {}, const Eigen::VectorXd* pinned_values = nullptr);

EsvEstimate esv_at(const ObservationSet& observations, const MixtureModel& mixture, const Valuer& valuer,
                   const McConfig& mc);

// What the outcome model needs besides the encoding.
struct ShotContext {
  ShotType shot_type = ShotType::rally;
  BounceFlag flag = BounceFlag::one_bounce;
  Handedness receiver_hand = Handedness::right;
  CourtGeometry geometry;
  double horizon = 5.0;
};

// Error rule first, then the classifier. Futures whose features cannot be
// extracted count as errors.
FutureValue value_encoding(const Eigen::VectorXd& encoding, const ShotContext& context, const OutcomeModel& model);
Valuer shot_valuer(const ShotContext& context, const OutcomeModel& model);

EsvEstimate esv_at(const ObservationSet& observations, const MixtureModel& mixture, const OutcomeModel& model,
                   const ShotContext& context, const McConfig& mc);

enum class ReceiverMarginal {
  conditional,    // receiver coefficients drawn given the shooter/ball block
  unconditional,  // receiver coefficients drawn from the mixture marginal
};

// Win probability with the shooter/ball block fixed at its observed values and
// the receiver integrated out.
EsvEstimate vast(const FunctionalEncoding& encoding, const ShotContext& context, const MixtureModel& mixture,
                 const OutcomeModel& model, const McConfig& mc,
                 ReceiverMarginal marginal = ReceiverMarginal::conditional);

// Win probability with only shooter and receiver impact positions and the
// bounce location fixed. Needs a one-bounce encoding.
EsvEstimate shot_iq(const FunctionalEncoding& encoding, const ShotContext& context, const MixtureModel& mixture,
                    const OutcomeModel& model, const McConfig& mc);

// Constraints used by shot_iq.
ObservationSet shot_iq_constraints(const FunctionalEncoding& encoding, double horizon = 5.0);

// Error rule and classifier on the observed encoding.
double pointwise_value(const FunctionalEncoding& encoding, const ShotContext& context, const OutcomeModel& model);

struct VaccResult {
  double value = 0.0;  // vast.mean - pointwise
  EsvEstimate vast;
  double pointwise = 0.0;
};

VaccResult vacc(const FunctionalEncoding& encoding, const ShotContext& context, const MixtureModel& mixture,
                const OutcomeModel& model, const McConfig& mc,
                ReceiverMarginal marginal = ReceiverMarginal::conditional);

// One metric value for one shot.
struct MetricSample {
  std::string shot_id;
  ShotType shot_type = ShotType::rally;
  std::string shooter_id;
  std::string receiver_id;
  std::string metric;  // vast, shot_iq or vacc
  double value = 0.0;
};

struct MetricRow {
  std::string player_id;
  ShotType shot_type = ShotType::rally;
  std::string metric;
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

struct MetricReport {
  std::vector<MetricRow> rows;  // sorted by player, shot type, metric
  std::size_t shot_iq_excluded = 0;  // no-bounce shots left out of Shot IQ
};

struct AggregateOptions {
  // Grouping key per metric: "shooter_id" or "receiver_id".
  std::vector<std::pair<std::string, std::string>> keys{
      {"vast", "shooter_id"}, {"shot_iq", "shooter_id"}, {"vacc", "receiver_id"}};
  // Metrics reported relative to the corpus mean of their shot type, under
  // the name "<metric>_over_average".
  std::vector<std::string> centered{"shot_iq"};
};

// Throws InvalidArgument for empty input, a metric without a grouping key or
// an unknown key.
MetricReport aggregate(const std::vector<MetricSample>& samples, const AggregateOptions& options = {});

void write_metric_report_csv(std::ostream& out, const MetricReport& report);

struct GridSpec {
  double cell_size = 1.0;
  double x_min = -4.115, x_max = 4.115;
  double y_min = 0.0, y_max = 11.885;
};

struct HeatCell {
  double x = 0.0;  // cell centre
  double y = 0.0;
  std::optional<double> mean;  // empty for cells without shots
  std::size_t count = 0;
};

struct LocatedValue {
  double x = 0.0;
  double y = 0.0;
  double value = 0.0;
};

// Per-cell means over a regular grid, rows of constant y from y_min upward.
// Points outside the region are skipped. Throws InvalidArgument for a
// non-positive cell size, an empty region or non-finite values.
std::vector<HeatCell> heatmap(const std::vector<LocatedValue>& values, const GridSpec& grid);

void write_heatmap_csv(std::ostream& out, const std::vector<HeatCell>& cells);

}  // namespace shotvalue
