#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "shotvalue/dpgmm.hpp"
#include "shotvalue/outcome.hpp"
#include "shotvalue/tracking.hpp"

namespace shotvalue {

// Versioned JSON documents. Doubles are written with enough digits to read
// back bit-identically; matrices are stored row-major.
inline constexpr int kModelFormatVersion = 1;

struct MixtureRecord {
  ShotType shot_type = ShotType::rally;
  BounceFlag flag = BounceFlag::one_bounce;
  MixtureModel model;
  std::size_t training_rows = 0;
  std::size_t heldout_rows = 0;
  std::optional<double> heldout_loglik;  // mean per held-out row
  double final_elbo = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct OutcomeRecord {
  std::string name;  // which shots the model covers, e.g. "serve" or "rally"
  OutcomeModel model;
  TrainReport report;
};

void write_mixture_json(std::ostream& out, const MixtureRecord& record);
// Throws ParseError for malformed documents, unknown formats or versions and
// layouts that do not match the bounce flag.
MixtureRecord read_mixture_json(std::istream& in);

void write_outcome_json(std::ostream& out, const OutcomeRecord& record);
OutcomeRecord read_outcome_json(std::istream& in);

void save_mixture(const std::string& path, const MixtureRecord& record);
MixtureRecord load_mixture(const std::string& path);
void save_outcome(const std::string& path, const OutcomeRecord& record);
OutcomeRecord load_outcome(const std::string& path);

}  // namespace shotvalue
