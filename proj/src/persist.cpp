#include "shotvalue/persist.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "shotvalue/error.hpp"
#include "shotvalue/trajectory.hpp"

namespace shotvalue {

using nlohmann::json;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr const char* kMixtureFormat = "shotvalue-mixture";
constexpr const char* kOutcomeFormat = "shotvalue-outcome";

json vec_json(const VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json mat_json(const MatrixXd& m) {
  std::vector<double> flat;
  flat.reserve(m.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", flat}};
}

VectorXd json_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

MatrixXd json_mat(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto flat = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != flat.size()) {
    throw ParseError("matrix data does not match its shape");
  }
  MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = flat[r * cols + c];
  }
  return m;
}

json parse_document(std::istream& in, const char* format) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed model file: ") + e.what());
  }
  if (!doc.is_object() || doc.value("format", "") != format) {
    throw ParseError(std::string("not a ") + format + " document");
  }
  const int version = doc.value("version", -1);
  if (version != kModelFormatVersion) {
    throw ParseError("unsupported " + std::string(format) + " version " + std::to_string(version));
  }
  return doc;
}

// Converts json access errors into ParseError.
template <class F>
auto guarded(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed model file: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("invalid model: ") + e.what());
  }
}

std::string_view kind_name(TermKind k) {
  switch (k) {
    case TermKind::linear: return "linear";
    case TermKind::smooth: return "smooth";
    case TermKind::tensor: return "tensor";
  }
  return "?";
}

TermKind parse_kind(const std::string& s) {
  if (s == "linear") return TermKind::linear;
  if (s == "smooth") return TermKind::smooth;
  if (s == "tensor") return TermKind::tensor;
  throw ParseError("unknown term kind '" + s + "'");
}

json report_json(const TrainReport& r) {
  json cal = json::array();
  for (const auto& b : r.calibration) {
    cal.push_back({{"lower", b.lower},
                   {"upper", b.upper},
                   {"count", b.count},
                   {"mean_predicted", b.mean_predicted},
                   {"observed", b.observed}});
  }
  json grid = json::array();
  for (const auto& g : r.grid) grid.push_back({{"lambda", g.lambda}, {"validation_log_loss", g.validation_log_loss}});
  return {{"rows", r.rows},
          {"log_loss", r.log_loss},
          {"win_precision", r.win_precision},
          {"win_recall", r.win_recall},
          {"in_play_precision", r.in_play_precision},
          {"in_play_recall", r.in_play_recall},
          {"calibration", cal},
          {"grid", grid}};
}

TrainReport json_report(const json& j) {
  TrainReport r;
  r.rows = j.at("rows").get<std::size_t>();
  r.log_loss = j.at("log_loss").get<double>();
  r.win_precision = j.at("win_precision").get<double>();
  r.win_recall = j.at("win_recall").get<double>();
  r.in_play_precision = j.at("in_play_precision").get<double>();
  r.in_play_recall = j.at("in_play_recall").get<double>();
  for (const auto& b : j.at("calibration")) {
    r.calibration.push_back({b.at("lower").get<double>(), b.at("upper").get<double>(),
                             b.at("count").get<std::size_t>(), b.at("mean_predicted").get<double>(),
                             b.at("observed").get<double>()});
  }
  for (const auto& g : j.at("grid")) {
    r.grid.push_back({g.at("lambda").get<std::array<double, 2>>(), g.at("validation_log_loss").get<double>()});
  }
  return r;
}

}  // namespace

void write_mixture_json(std::ostream& out, const MixtureRecord& record) {
  const auto& layout = EncodingLayout::for_flag(record.flag);
  if (record.model.dim() != layout.dim()) throw InvalidArgument("mixture dimension does not match the layout");
  json comps = json::array();
  for (const auto& c : record.model.components()) {
    comps.push_back({{"weight", c.weight}, {"mean", vec_json(c.mean)}, {"covariance", mat_json(c.covariance)}});
  }
  json doc = {{"format", kMixtureFormat},
              {"version", kModelFormatVersion},
              {"shot_type", to_string(record.shot_type)},
              {"bounce_flag", to_string(record.flag)},
              {"layout", layout.names()},
              {"components", comps},
              {"training_rows", record.training_rows},
              {"heldout_rows", record.heldout_rows},
              {"final_elbo", record.final_elbo},
              {"iterations", record.iterations},
              {"converged", record.converged}};
  doc["heldout_loglik"] = record.heldout_loglik ? json(*record.heldout_loglik) : json(nullptr);
  if (const auto& p = record.model.prior()) {
    doc["prior"] = {{"alpha", p->alpha},
                    {"mean", vec_json(p->mean)},
                    {"mean_precision", p->mean_precision},
                    {"dof", p->dof},
                    {"scale", mat_json(p->scale)}};
  } else {
    doc["prior"] = nullptr;
  }
  out << doc.dump(1) << '\n';
}

MixtureRecord read_mixture_json(std::istream& in) {
  const json doc = parse_document(in, kMixtureFormat);
  return guarded([&] {
    MixtureRecord r;
    r.shot_type = parse_shot_type(doc.at("shot_type").get<std::string>());
    r.flag = parse_bounce_flag(doc.at("bounce_flag").get<std::string>());
    const auto& layout = EncodingLayout::for_flag(r.flag);
    const auto names = doc.at("layout").get<std::vector<std::string>>();
    if (names != layout.names()) throw ParseError("stored layout does not match the " + std::string(to_string(r.flag)) + " layout");
    std::vector<MixtureComponent> comps;
    for (const auto& c : doc.at("components")) {
      MixtureComponent m{c.at("weight").get<double>(), json_vec(c.at("mean")), json_mat(c.at("covariance"))};
      if (m.mean.size() != layout.dim() || m.covariance.rows() != layout.dim() ||
          m.covariance.cols() != layout.dim()) {
        throw ParseError("component shape does not match the layout");
      }
      comps.push_back(std::move(m));
    }
    std::optional<DpPrior> prior;
    if (const auto& p = doc.at("prior"); !p.is_null()) {
      DpPrior d;
      d.alpha = p.at("alpha").get<double>();
      d.mean = json_vec(p.at("mean"));
      d.mean_precision = p.at("mean_precision").get<double>();
      d.dof = p.at("dof").get<double>();
      d.scale = json_mat(p.at("scale"));
      d.validate();
      prior = std::move(d);
    }
    r.model = MixtureModel(std::move(comps), names, std::move(prior));
    r.training_rows = doc.at("training_rows").get<std::size_t>();
    r.heldout_rows = doc.at("heldout_rows").get<std::size_t>();
    if (const auto& h = doc.at("heldout_loglik"); !h.is_null()) r.heldout_loglik = h.get<double>();
    r.final_elbo = doc.at("final_elbo").get<double>();
    r.iterations = doc.at("iterations").get<int>();
    r.converged = doc.at("converged").get<bool>();
    return r;
  });
}

void write_outcome_json(std::ostream& out, const OutcomeRecord& record) {
  const auto& m = record.model;
  json terms = json::array();
  for (const auto& t : m.terms()) {
    json features = json::array();
    for (int f : t.features) features.push_back(m.feature_names().at(f));
    json bases = json::array();
    for (const auto& b : t.bases) {
      bases.push_back({{"degree", b.degree()}, {"lower", b.lower()}, {"upper", b.upper()}, {"interior", b.interior()}});
    }
    terms.push_back({{"kind", kind_name(t.kind)}, {"features", features}, {"group", t.group}, {"bases", bases}});
  }
  json doc = {{"format", kOutcomeFormat},
              {"version", kModelFormatVersion},
              {"name", record.name},
              {"feature_names", m.feature_names()},
              {"terms", terms},
              {"coefficients", vec_json(m.coefficients())},
              {"lambda", m.lambda()},
              {"report", report_json(record.report)}};
  out << doc.dump(1) << '\n';
}

OutcomeRecord read_outcome_json(std::istream& in) {
  const json doc = parse_document(in, kOutcomeFormat);
  return guarded([&] {
    OutcomeRecord r;
    r.name = doc.at("name").get<std::string>();
    const auto names = doc.at("feature_names").get<std::vector<std::string>>();
    std::vector<Term> terms;
    for (const auto& t : doc.at("terms")) {
      Term term;
      term.kind = parse_kind(t.at("kind").get<std::string>());
      term.group = t.at("group").get<int>();
      for (const auto& f : t.at("features")) {
        const auto name = f.get<std::string>();
        const auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) throw ParseError("term refers to unknown feature '" + name + "'");
        term.features.push_back(static_cast<int>(it - names.begin()));
      }
      for (const auto& b : t.at("bases")) {
        term.bases.emplace_back(b.at("lower").get<double>(), b.at("upper").get<double>(),
                                b.at("interior").get<std::vector<double>>(), b.at("degree").get<int>());
      }
      terms.push_back(std::move(term));
    }
    r.model = OutcomeModel(names, std::move(terms), json_vec(doc.at("coefficients")),
                           doc.at("lambda").get<std::array<double, 2>>());
    r.report = json_report(doc.at("report"));
    return r;
  });
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return in;
}

}  // namespace

void save_mixture(const std::string& path, const MixtureRecord& record) {
  auto out = open_out(path);
  write_mixture_json(out, record);
  if (!out) throw IoError("failed writing " + path);
}

MixtureRecord load_mixture(const std::string& path) {
  auto in = open_in(path);
  try {
    return read_mixture_json(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void save_outcome(const std::string& path, const OutcomeRecord& record) {
  auto out = open_out(path);
  write_outcome_json(out, record);
  if (!out) throw IoError("failed writing " + path);
}

OutcomeRecord load_outcome(const std::string& path) {
  auto in = open_in(path);
  try {
    return read_outcome_json(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace shotvalue
