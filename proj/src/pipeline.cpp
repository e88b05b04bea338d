#include "shotvalue/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <thread>

#include "shotvalue/conditioning.hpp"
#include "shotvalue/error.hpp"
#include "shotvalue/persist.hpp"
#include "shotvalue/rng.hpp"
#include "text.hpp"

namespace shotvalue {

using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace fs = std::filesystem;

namespace {

// ---- value parsing ----

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const std::string& why) {
  throw ConfigError("bad value '" + std::string(value) + "' for " + std::string(key) + ": " + why);
}

double to_double(std::string_view key, std::string_view value) {
  try {
    return parse_double(value);
  } catch (const ParseError&) {
    bad_value(key, value, "expected a number");
  }
}

template <class Int>
Int to_int(std::string_view key, std::string_view value) {
  Int out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) bad_value(key, value, "expected an integer");
  return out;
}

bool to_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  bad_value(key, value, "expected true or false");
}

std::vector<double> to_list(std::string_view key, std::string_view value) {
  std::vector<double> out;
  for (auto field : detail::split_csv(value)) out.push_back(to_double(key, field));
  return out;
}

std::array<double, 3> to_triple(std::string_view key, std::string_view value) {
  const auto v = to_list(key, value);
  if (v.size() != 3) bad_value(key, value, "expected three comma-separated numbers");
  return {v[0], v[1], v[2]};
}

using Setter = void (*)(PipelineConfig&, std::string_view key, std::string_view value);

struct KeySpec {
  const char* name;
  Setter set;
};

#define SV_NUM(field) [](PipelineConfig& c, std::string_view k, std::string_view v) { c.field = to_double(k, v); }
#define SV_INT(field)                                                \
  [](PipelineConfig& c, std::string_view k, std::string_view v) {    \
    c.field = to_int<std::decay_t<decltype(c.field)>>(k, v);          \
  }

const std::vector<KeySpec>& key_table() {
  static const std::vector<KeySpec> table{
      {"seed", SV_INT(seed)},
      {"out_dir", [](PipelineConfig& c, std::string_view, std::string_view v) { c.out_dir = v; }},
      {"tracking", [](PipelineConfig& c, std::string_view, std::string_view v) { c.tracking = v; }},
      {"metadata", [](PipelineConfig& c, std::string_view, std::string_view v) { c.metadata = v; }},
      {"model_dir", [](PipelineConfig& c, std::string_view, std::string_view v) { c.model_dir = v; }},
      {"split_fraction", SV_NUM(split_fraction)},
      {"timestamp", [](PipelineConfig& c, std::string_view k, std::string_view v) { c.timestamp = to_bool(k, v); }},
      {"threads", SV_INT(threads)},
      {"geometry.court_half_length", SV_NUM(geometry.court_half_length)},
      {"geometry.singles_half_width", SV_NUM(geometry.singles_half_width)},
      {"geometry.service_line_distance", SV_NUM(geometry.service_line_distance)},
      {"geometry.net_height_center", SV_NUM(geometry.net_height_center)},
      {"synth.n_shots", SV_INT(n_shots)},
      {"synth.gravity", SV_NUM(synth.gravity)},
      {"synth.restitution", SV_NUM(synth.restitution)},
      {"synth.sample_rate", SV_NUM(synth.sample_rate)},
      {"synth.noise_sd", SV_NUM(synth.noise_sd)},
      {"synth.shot_type_mix",
       [](PipelineConfig& c, std::string_view k, std::string_view v) { c.synth.shot_type_mix = to_triple(k, v); }},
      {"synth.no_bounce_fraction", SV_NUM(synth.no_bounce_fraction)},
      {"synth.flip_fraction", SV_NUM(synth.flip_fraction)},
      {"synth.serve_flight_min", SV_NUM(synth.serve_flight_min)},
      {"synth.serve_flight_max", SV_NUM(synth.serve_flight_max)},
      {"synth.rally_flight_min", SV_NUM(synth.rally_flight_min)},
      {"synth.rally_flight_max", SV_NUM(synth.rally_flight_max)},
      {"synth.target_margin", SV_NUM(synth.target_margin)},
      {"synth.archetype_mix",
       [](PipelineConfig& c, std::string_view k, std::string_view v) { c.synth.archetype_mix = to_triple(k, v); }},
      {"synth.anticipator_spread", SV_NUM(synth.anticipator_spread)},
      {"synth.flat_footed_depth", SV_NUM(synth.flat_footed_depth)},
      {"synth.rule.intercept", SV_NUM(synth.rule.intercept)},
      {"synth.rule.impact_speed", SV_NUM(synth.rule.impact_speed)},
      {"synth.rule.required_speed", SV_NUM(synth.rule.required_speed)},
      {"synth.rule.abs_bounce_x", SV_NUM(synth.rule.abs_bounce_x)},
      {"synth.rule.bounce_y", SV_NUM(synth.rule.bounce_y)},
      {"encode.bounce_threshold",
       [](PipelineConfig& c, std::string_view k, std::string_view v) {
         c.parse.bounce_threshold = c.trajectory.bounce_threshold = to_double(k, v);
       }},
      {"encode.ground_tolerance", SV_NUM(parse.ground_tolerance)},
      {"encode.horizon", SV_NUM(trajectory.root_horizon)},
      {"encode.player_speed_cap", SV_NUM(trajectory.player_speed_cap)},
      {"gmm.alpha", SV_NUM(gmm_alpha)},
      {"gmm.truncation", SV_INT(gmm.truncation)},
      {"gmm.max_iterations", SV_INT(gmm.max_iterations)},
      {"gmm.tolerance", SV_NUM(gmm.tolerance)},
      {"gmm.restarts", SV_INT(gmm.restarts)},
      {"gmm.jitter", SV_NUM(gmm.jitter)},
      {"gmm.prune_threshold", SV_NUM(gmm.prune_threshold)},
      {"gmm.init",
       [](PipelineConfig& c, std::string_view k, std::string_view v) {
         if (v == "split") c.gmm.init = InitStrategy::split;
         else if (v == "kmeanspp") c.gmm.init = InitStrategy::kmeanspp;
         else bad_value(k, v, "expected split or kmeanspp");
       }},
      {"outcome.spline_interior_knots", SV_INT(outcome.spline_interior_knots)},
      {"outcome.tensor_basis_size", SV_INT(outcome.tensor_basis_size)},
      {"outcome.lambda_grid",
       [](PipelineConfig& c, std::string_view k, std::string_view v) { c.outcome.lambda_grid = to_list(k, v); }},
      {"outcome.validation_fraction", SV_NUM(outcome.validation_fraction)},
      {"outcome.max_iterations", SV_INT(outcome.max_iterations)},
      {"outcome.tolerance", SV_NUM(outcome.tolerance)},
      {"mc.n_samples", SV_INT(mc.n_samples)},
      {"mc.batch", SV_INT(mc.batch)},
      {"mc.receiver_marginal",
       [](PipelineConfig& c, std::string_view k, std::string_view v) {
         if (v == "conditional") c.marginal = ReceiverMarginal::conditional;
         else if (v == "unconditional") c.marginal = ReceiverMarginal::unconditional;
         else bad_value(k, v, "expected conditional or unconditional");
       }},
      {"esv.noise_var", SV_NUM(esv_noise_var)},
      {"heatmap.metric",
       [](PipelineConfig& c, std::string_view k, std::string_view v) {
         if (v != "vast" && v != "vacc" && v != "shot_iq" && v != "pointwise") {
           bad_value(k, v, "expected vast, vacc, shot_iq or pointwise");
         }
         c.heatmap_metric = v;
       }},
      {"heatmap.cell_size", SV_NUM(grid.cell_size)},
      {"heatmap.x_min", SV_NUM(grid.x_min)},
      {"heatmap.x_max", SV_NUM(grid.x_max)},
      {"heatmap.y_min", SV_NUM(grid.y_min)},
      {"heatmap.y_max", SV_NUM(grid.y_max)},
  };
  return table;
}

#undef SV_NUM
#undef SV_INT

// ---- files ----

std::string timestamp_line() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[64];
  std::strftime(buf, sizeof buf, "# generated %Y-%m-%dT%H:%M:%SZ\n", &tm);
  return buf;
}

std::ofstream open_output(const PipelineConfig& config, const fs::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  if (config.timestamp) out << timestamp_line();
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

std::ifstream open_input(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(std::string("cannot open ") + what + " " + path);
  return in;
}

void say(const Logger& log, const std::string& line) {
  if (log) log(line);
}

std::string group_name(ShotType type, BounceFlag flag) {
  return std::string(to_string(type)) + "_" + std::string(to_string(flag));
}

fs::path mixture_file(const PipelineConfig& c, ShotType type, BounceFlag flag) {
  return fs::path(c.model_path()) / ("gmm_" + group_name(type, flag) + ".json");
}

const char* outcome_name(ShotType type) { return type == ShotType::serve ? "serve" : "rally"; }

fs::path outcome_file(const PipelineConfig& c, const std::string& name) {
  return fs::path(c.model_path()) / ("outcome_" + name + ".json");
}

constexpr ShotType kShotTypes[] = {ShotType::serve, ShotType::serve_return, ShotType::rally};
constexpr BounceFlag kFlags[] = {BounceFlag::one_bounce, BounceFlag::no_bounce};

// ---- corpus ----

struct CorpusShot {
  ShotRecord record;  // canonical frame
  std::optional<FunctionalEncoding> encoding;
  std::string failure;
  bool heldout = false;
};

std::vector<ShotRecord> read_records(const PipelineConfig& config) {
  const auto tracking_path = config.tracking_path();
  const auto metadata_path = config.metadata_path();
  auto tracking = open_input(tracking_path, "tracking file");
  auto metadata = open_input(metadata_path, "metadata file");
  try {
    return parse_tracking(tracking, metadata, config.parse);
  } catch (const ParseError& e) {
    throw ParseError(tracking_path + " / " + metadata_path + ": " + e.what(), e.line());
  }
}

std::vector<CorpusShot> load_corpus(const PipelineConfig& config, const Logger& log) {
  std::vector<CorpusShot> shots;
  std::size_t failed = 0;
  for (auto& raw : read_records(config)) {
    CorpusShot s;
    s.record = canonicalize(raw);
    s.heldout = is_heldout(config.seed, s.record.shot_id, config.split_fraction);
    try {
      s.encoding = encode(s.record, config.trajectory).encoding;
    } catch (const Error& e) {
      s.failure = e.what();
      ++failed;
    }
    shots.push_back(std::move(s));
  }
  if (shots.empty()) throw InvalidArgument("tracking file " + config.tracking_path() + " contains no shots");
  if (failed > 0) say(log, std::to_string(failed) + " of " + std::to_string(shots.size()) + " shots could not be encoded");
  return shots;
}

std::optional<ShotFeatures> try_features(const CorpusShot& s, const PipelineConfig& config) {
  try {
    return extract_features(*s.encoding, s.record.receiver_meta.handedness, s.record.shot_type,
                            config.trajectory.root_horizon);
  } catch (const GeometryError&) {
    return std::nullopt;
  }
}

ShotContext context_for(const ShotRecord& r, const PipelineConfig& config) {
  ShotContext ctx;
  ctx.shot_type = r.shot_type;
  ctx.flag = r.bounce_flag;
  ctx.receiver_hand = r.receiver_meta.handedness;
  ctx.geometry = config.geometry;
  ctx.horizon = config.trajectory.root_horizon;
  return ctx;
}

std::string fmt(double v) { return format_double(v); }

// Minimal reader for CSVs written by this file.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name, const std::string& path) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError(path + ": missing column '" + name + "'");
    return static_cast<int>(it - header.begin());
  }
};

Table read_table(const std::string& path) {
  auto in = open_input(path, "file");
  Table t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::is_blank_or_comment(line)) continue;
    std::vector<std::string> fields;
    for (auto f : detail::split_csv(line)) fields.emplace_back(f);
    if (t.header.empty()) {
      t.header = std::move(fields);
    } else {
      if (fields.size() != t.header.size()) throw ParseError(path + ": wrong number of fields", line_no);
      t.rows.push_back(std::move(fields));
    }
  }
  if (t.header.empty()) throw ParseError(path + ": empty file");
  return t;
}

template <class F>
void parallel_for(std::size_t n, int threads, F&& body) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads) : std::thread::hardware_concurrency();
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < n; i = next++) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
        next = n;
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

// ---- config ----

std::string PipelineConfig::tracking_path() const {
  return tracking.empty() ? (fs::path(out_dir) / "tracking.csv").string() : tracking;
}

std::string PipelineConfig::metadata_path() const {
  return metadata.empty() ? (fs::path(out_dir) / "metadata.csv").string() : metadata;
}

std::string PipelineConfig::model_path() const {
  return model_dir.empty() ? (fs::path(out_dir) / "models").string() : model_dir;
}

void PipelineConfig::set(std::string_view key, std::string_view value) {
  for (const auto& k : key_table()) {
    if (key == k.name) {
      k.set(*this, key, detail::trim(value));
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

void PipelineConfig::validate() const {
  try {
    if (out_dir.empty()) throw InvalidArgument("out_dir is empty");
    if (!(split_fraction > 0 && split_fraction <= 0.5)) throw InvalidArgument("split_fraction must lie in (0, 0.5]");
    if (threads < 0) throw InvalidArgument("threads must be non-negative");
    if (n_shots < 1) throw InvalidArgument("synth.n_shots must be at least 1");
    geometry.validate();
    SynthConfig s = synth;
    s.geometry = geometry;
    s.validate();
    if (!(gmm_alpha > 0)) throw InvalidArgument("gmm.alpha must be positive");
    gmm.validate();
    outcome.validate();
    mc.validate();
    if (!(esv_noise_var >= 0)) throw InvalidArgument("esv.noise_var must be non-negative");
    if (!(grid.cell_size > 0) || !(grid.x_max > grid.x_min) || !(grid.y_max > grid.y_min)) {
      throw InvalidArgument("heatmap region or cell size is invalid");
    }
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& k : key_table()) out.emplace_back(k.name);
    return out;
  }();
  return keys;
}

PipelineConfig load_pipeline_config(std::istream& in) {
  PipelineConfig c;
  std::size_t line_no = 0;
  std::vector<detail::KeyValue> entries;
  try {
    entries = detail::read_key_values(in, line_no);
  } catch (const ParseError& e) {
    throw ConfigError("line " + std::to_string(e.line()) + ": " + e.what());
  }
  for (const auto& [key, value, line] : entries) {
    try {
      c.set(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line) + ": " + e.what());
    }
  }
  c.validate();
  return c;
}

PipelineConfig load_pipeline_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  try {
    return load_pipeline_config(in);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

bool is_heldout(std::uint64_t seed, std::string_view shot_id, double fraction) {
  const std::uint64_t h = derive_seed(derive_seed(seed, "split"), shot_id);
  return static_cast<double>(h >> 11) * 0x1.0p-53 < fraction;
}

// ---- commands ----

void cmd_simulate(const PipelineConfig& config, const Logger& log) {
  config.validate();
  SynthConfig s = config.synth;
  s.geometry = config.geometry;
  s.seed = derive_seed(config.seed, "simulate");
  const auto shots = generate_corpus(s, config.n_shots, s.seed);
  std::vector<ShotRecord> records;
  records.reserve(shots.size());
  for (const auto& shot : shots) records.push_back(shot.record);

  const fs::path dir(config.out_dir);
  const fs::path tracking = config.tracking_path(), metadata = config.metadata_path(), truth = dir / "truth.csv";
  {
    auto out = open_output(config, tracking);
    write_tracking_csv(out, records);
    finish(out, tracking);
  }
  {
    auto out = open_output(config, metadata);
    write_metadata_csv(out, records);
    finish(out, metadata);
  }
  {
    auto out = open_output(config, truth);
    write_truth_csv(out, shots);
    finish(out, truth);
  }
  say(log, "simulated " + std::to_string(shots.size()) + " shots into " + tracking.string());
}

void cmd_encode(const PipelineConfig& config, const Logger& log) {
  config.validate();
  const auto shots = load_corpus(config, log);

  std::vector<std::string> columns = EncodingLayout::for_flag(BounceFlag::one_bounce).names();
  for (const auto& n : EncodingLayout::for_flag(BounceFlag::no_bounce).names()) {
    if (std::find(columns.begin(), columns.end(), n) == columns.end()) columns.push_back(n);
  }

  const fs::path enc_path = fs::path(config.out_dir) / "encodings.csv";
  const fs::path feat_path = fs::path(config.out_dir) / "features.csv";
  auto enc_out = open_output(config, enc_path);
  auto feat_out = open_output(config, feat_path);

  enc_out << "shot_id,shot_type,bounce_flag";
  for (const auto& c : columns) enc_out << ',' << c;
  enc_out << '\n';
  feat_out << "shot_id,shot_type,bounce_flag,outcome,error_rule,heldout";
  for (const auto& n : outcome_feature_names()) feat_out << ',' << n;
  feat_out << '\n';

  std::size_t written = 0;
  for (const auto& s : shots) {
    if (!s.encoding) continue;
    const auto& enc = *s.encoding;
    const auto& r = s.record;
    enc_out << r.shot_id << ',' << to_string(r.shot_type) << ',' << to_string(enc.flag);
    for (const auto& c : columns) {
      enc_out << ',';
      if (const auto i = enc.layout().index_of(c)) enc_out << fmt(enc.values(*i));
    }
    enc_out << '\n';

    const auto features = try_features(s, config);
    const bool error_rule = !features || classify_error(enc, r.shot_type, config.geometry, config.trajectory.root_horizon);
    feat_out << r.shot_id << ',' << to_string(r.shot_type) << ',' << to_string(enc.flag) << ','
             << to_string(r.outcome) << ',' << (error_rule ? 1 : 0) << ',' << (s.heldout ? 1 : 0);
    if (features) {
      const VectorXd v = feature_vector(*features);
      for (Eigen::Index i = 0; i < v.size(); ++i) feat_out << ',' << fmt(v(i));
    } else {
      for (std::size_t i = 0; i < outcome_feature_names().size(); ++i) feat_out << ',';
    }
    feat_out << '\n';
    ++written;
  }
  finish(enc_out, enc_path);
  finish(feat_out, feat_path);
  say(log, "encoded " + std::to_string(written) + " shots into " + enc_path.string());
}

void cmd_fit_gmm(const PipelineConfig& config, const Logger& log) {
  config.validate();
  const auto shots = load_corpus(config, log);
  fs::create_directories(config.model_path());

  const fs::path report_path = fs::path(config.out_dir) / "gmm_report.csv";
  auto report = open_output(config, report_path);
  report << "group,shot_type,bounce_flag,status,training_rows,heldout_rows,components,final_elbo,iterations,"
            "converged,heldout_loglik\n";

  for (ShotType type : kShotTypes) {
    for (BounceFlag flag : kFlags) {
      const auto name = group_name(type, flag);
      const int d = EncodingLayout::for_flag(flag).dim();
      std::vector<const VectorXd*> train, held;
      for (const auto& s : shots) {
        if (!s.encoding || s.record.shot_type != type || s.encoding->flag != flag) continue;
        (s.heldout ? held : train).push_back(&s.encoding->values);
      }
      const fs::path model_path = mixture_file(config, type, flag);
      report << name << ',' << to_string(type) << ',' << to_string(flag) << ',';
      if (static_cast<int>(train.size()) <= d) {
        std::error_code ec;
        fs::remove(model_path, ec);
        report << "skipped," << train.size() << ',' << held.size() << ",,,,,\n";
        say(log, "skipped " + name + ": " + std::to_string(train.size()) + " training rows for " +
                     std::to_string(d) + " dimensions");
        continue;
      }
      MatrixXd data(static_cast<Eigen::Index>(train.size()), d);
      for (std::size_t i = 0; i < train.size(); ++i) data.row(static_cast<Eigen::Index>(i)) = train[i]->transpose();
      FitConfig fc = config.gmm;
      fc.seed = derive_seed(config.seed, "gmm:" + name);
      const auto prior = DpPrior::weakly_informative(data, config.gmm_alpha);
      auto fit = fit_dpgmm(data, prior, fc);

      MixtureRecord rec;
      rec.shot_type = type;
      rec.flag = flag;
      rec.training_rows = train.size();
      rec.heldout_rows = held.size();
      rec.final_elbo = fit.report.elbo_trace.empty() ? 0.0 : fit.report.elbo_trace.back();
      rec.iterations = fit.report.iterations;
      rec.converged = fit.report.converged;
      if (!held.empty()) {
        MatrixXd h(static_cast<Eigen::Index>(held.size()), d);
        for (std::size_t i = 0; i < held.size(); ++i) h.row(static_cast<Eigen::Index>(i)) = held[i]->transpose();
        rec.heldout_loglik = holdout_loglik(fit.model, h);
      }
      rec.model = MixtureModel(fit.model.components(), EncodingLayout::for_flag(flag).names(), prior);
      save_mixture(model_path.string(), rec);

      report << "fitted," << rec.training_rows << ',' << rec.heldout_rows << ',' << rec.model.size() << ','
             << fmt(rec.final_elbo) << ',' << rec.iterations << ',' << (rec.converged ? 1 : 0) << ','
             << (rec.heldout_loglik ? fmt(*rec.heldout_loglik) : "") << '\n';
      say(log, "fitted " + name + ": " + std::to_string(rec.model.size()) + " components from " +
                   std::to_string(rec.training_rows) + " rows");
    }
  }
  finish(report, report_path);
}

void cmd_fit_outcome(const PipelineConfig& config, const Logger& log) {
  config.validate();
  const auto shots = load_corpus(config, log);
  fs::create_directories(config.model_path());

  const fs::path report_path = fs::path(config.out_dir) / "outcome_report.csv";
  const fs::path cal_path = fs::path(config.out_dir) / "calibration.csv";
  auto report = open_output(config, report_path);
  auto cal = open_output(config, cal_path);
  report << "model,split,rows,log_loss,win_precision,win_recall,in_play_precision,in_play_recall,"
            "lambda_univariate,lambda_spatial\n";
  cal << "model,split,bin,lower,upper,count,mean_predicted,observed\n";

  auto write_report = [&](const std::string& name, const char* split, const TrainReport& r,
                          const std::array<double, 2>& lambda) {
    report << name << ',' << split << ',' << r.rows << ',' << fmt(r.log_loss) << ',' << fmt(r.win_precision) << ','
           << fmt(r.win_recall) << ',' << fmt(r.in_play_precision) << ',' << fmt(r.in_play_recall) << ','
           << fmt(lambda[0]) << ',' << fmt(lambda[1]) << '\n';
    for (std::size_t b = 0; b < r.calibration.size(); ++b) {
      const auto& c = r.calibration[b];
      cal << name << ',' << split << ',' << b << ',' << fmt(c.lower) << ',' << fmt(c.upper) << ',' << c.count << ','
          << fmt(c.mean_predicted) << ',' << fmt(c.observed) << '\n';
    }
  };

  for (const std::string name : {"serve", "rally"}) {
    std::vector<VectorXd> train_x, held_x;
    std::vector<int> train_y, held_y;
    auto collect = [&](bool pooled) {
      train_x.clear(), held_x.clear(), train_y.clear(), held_y.clear();
      for (const auto& s : shots) {
        if (!s.encoding || s.record.outcome == Outcome::error) continue;
        if (!pooled && outcome_name(s.record.shot_type) != name) continue;
        const auto features = try_features(s, config);
        if (!features) continue;
        (s.heldout ? held_x : train_x).push_back(feature_vector(*features));
        (s.heldout ? held_y : train_y).push_back(s.record.outcome == Outcome::win ? 1 : 0);
      }
    };
    collect(false);
    if (train_x.size() < kMinOutcomeRows) {
      say(log, "only " + std::to_string(train_x.size()) + " non-error " + name +
                   " shots; fitting the " + name + " model on every shot type");
      collect(true);
    }
    const auto p = static_cast<Eigen::Index>(outcome_feature_names().size());
    MatrixXd x(static_cast<Eigen::Index>(train_x.size()), p);
    for (std::size_t i = 0; i < train_x.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = train_x[i].transpose();
    OutcomeConfig oc = config.outcome;
    oc.seed = derive_seed(config.seed, "outcome:" + name);
    auto fit = fit_outcome(x, train_y, outcome_feature_names(), oc);

    OutcomeRecord rec{name, fit.model, fit.report};
    save_outcome(outcome_file(config, name).string(), rec);
    write_report(name, "validation", fit.report, fit.model.lambda());
    if (!held_x.empty()) {
      VectorXd predicted(static_cast<Eigen::Index>(held_x.size()));
      for (std::size_t i = 0; i < held_x.size(); ++i) predicted(static_cast<Eigen::Index>(i)) = predict_win(fit.model, held_x[i]);
      write_report(name, "heldout", evaluate(predicted, held_y), fit.model.lambda());
    }
    say(log, "fitted " + name + " outcome model on " + std::to_string(train_x.size()) + " shots");
  }
  finish(report, report_path);
  finish(cal, cal_path);
}

EsvEstimate cmd_esv(const PipelineConfig& config, const std::string& shot_id, double t) {
  config.validate();
  if (!(t >= 0)) throw InvalidArgument("t must be non-negative");
  const auto records = read_records(config);
  const auto it = std::find_if(records.begin(), records.end(), [&](const ShotRecord& r) { return r.shot_id == shot_id; });
  if (it == records.end()) throw NotFound("shot '" + shot_id + "' not in " + config.tracking_path());
  const ShotRecord r = canonicalize(*it);

  const auto mixture = load_mixture(mixture_file(config, r.shot_type, r.bounce_flag).string());
  const auto outcome = load_outcome(outcome_file(config, outcome_name(r.shot_type)).string());

  std::vector<Observation> obs;
  auto add = [&](ObservationKind kind, const std::vector<TrackingSample>& samples, int axes) {
    for (const auto& s : samples) {
      if (s.t > t) continue;
      const double v[3] = {s.x, s.y, s.z};
      for (int a = 0; a < axes; ++a) obs.push_back({kind, s.t, a, v[a], config.esv_noise_var});
    }
  };
  add(ObservationKind::ball, r.ball, 3);
  add(ObservationKind::shooter, r.shooter, 2);
  add(ObservationKind::receiver, r.receiver, 2);

  std::optional<double> hint;
  if (r.bounce_flag == BounceFlag::one_bounce) hint = detect_bounce(r.ball, config.trajectory.bounce_threshold).time;
  const auto& layout = EncodingLayout::for_flag(r.bounce_flag);
  const auto constraints = constraints_from_observations(obs, layout, hint);

  McConfig mc = config.mc;
  mc.seed = derive_seed(derive_seed(config.seed, "esv"), shot_id);
  return esv_at(constraints, mixture.model, outcome.model, context_for(r, config), mc);
}

void cmd_metrics(const PipelineConfig& config, const Logger& log) {
  config.validate();
  const auto shots = load_corpus(config, log);

  std::map<std::pair<ShotType, BounceFlag>, MixtureModel> mixtures;
  for (ShotType type : kShotTypes) {
    for (BounceFlag flag : kFlags) {
      const auto path = mixture_file(config, type, flag);
      if (fs::exists(path)) mixtures.emplace(std::pair{type, flag}, load_mixture(path.string()).model);
    }
  }
  if (mixtures.empty()) throw NotFound("no mixture models in " + config.model_path());
  std::map<std::string, OutcomeModel> outcomes;
  for (const char* name : {"serve", "rally"}) outcomes[name] = load_outcome(outcome_file(config, name).string()).model;

  struct ShotResult {
    bool done = false;
    std::string skipped;
    double pointwise = 0.0;
    EsvEstimate vast;
    double vacc = 0.0;
    std::optional<EsvEstimate> shot_iq;
    BouncePoint bounce;
  };
  std::vector<ShotResult> results(shots.size());
  const std::uint64_t metric_seed = derive_seed(config.seed, "metrics");

  parallel_for(shots.size(), config.threads, [&](std::size_t i) {
    const auto& s = shots[i];
    auto& out = results[i];
    if (!s.encoding) {
      out.skipped = "not encoded";
      return;
    }
    const auto mix = mixtures.find({s.record.shot_type, s.encoding->flag});
    if (mix == mixtures.end()) {
      out.skipped = "no mixture for " + group_name(s.record.shot_type, s.encoding->flag);
      return;
    }
    const auto& model = outcomes.at(outcome_name(s.record.shot_type));
    const auto ctx = context_for(s.record, config);
    McConfig mc = config.mc;
    try {
      mc.seed = derive_seed(metric_seed, s.record.shot_id + ":vast");
      const auto v = vacc(*s.encoding, ctx, mix->second, model, mc, config.marginal);
      out.pointwise = v.pointwise;
      out.vast = v.vast;
      out.vacc = v.value;
      if (s.encoding->flag == BounceFlag::one_bounce) {
        mc.seed = derive_seed(metric_seed, s.record.shot_id + ":shot_iq");
        out.shot_iq = shot_iq(*s.encoding, ctx, mix->second, model, mc);
        out.bounce = bounce_location(*s.encoding, ctx.horizon);
      }
      out.done = true;
    } catch (const NumericError& e) {
      out.skipped = e.what();
    } catch (const GeometryError& e) {
      out.skipped = e.what();
    }
  });

  const fs::path shot_path = fs::path(config.out_dir) / "shot_metrics.csv";
  auto shot_out = open_output(config, shot_path);
  shot_out << "shot_id,shot_type,bounce_flag,shooter_id,receiver_id,bounce_x,bounce_y,pointwise,vast,vast_se,vacc,"
              "shot_iq,shot_iq_se\n";
  std::vector<MetricSample> samples;
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < shots.size(); ++i) {
    const auto& r = shots[i].record;
    const auto& res = results[i];
    if (!res.done) {
      ++skipped;
      continue;
    }
    shot_out << r.shot_id << ',' << to_string(r.shot_type) << ',' << to_string(r.bounce_flag) << ','
             << r.shooter_meta.player_id << ',' << r.receiver_meta.player_id << ',';
    if (res.shot_iq) shot_out << fmt(res.bounce.x) << ',' << fmt(res.bounce.y);
    else shot_out << ',';
    shot_out << ',' << fmt(res.pointwise) << ',' << fmt(res.vast.mean) << ',' << fmt(res.vast.se) << ','
             << fmt(res.vacc) << ',';
    if (res.shot_iq) shot_out << fmt(res.shot_iq->mean) << ',' << fmt(res.shot_iq->se);
    else shot_out << ',';
    shot_out << '\n';

    auto sample = [&](const char* metric, double value) {
      samples.push_back({r.shot_id, r.shot_type, r.shooter_meta.player_id, r.receiver_meta.player_id, metric, value});
    };
    sample("vast", res.vast.mean);
    sample("vacc", res.vacc);
    if (res.shot_iq) sample("shot_iq", res.shot_iq->mean);
  }
  finish(shot_out, shot_path);
  if (samples.empty()) throw InvalidArgument("no shot could be scored");

  const auto report = aggregate(samples);
  const fs::path metrics_path = fs::path(config.out_dir) / "metrics.csv";
  auto metrics_out = open_output(config, metrics_path);
  write_metric_report_csv(metrics_out, report);
  finish(metrics_out, metrics_path);

  const std::size_t no_bounce = static_cast<std::size_t>(std::count_if(
      results.begin(), results.end(), [](const ShotResult& r) { return r.done && !r.shot_iq; }));
  say(log, "scored " + std::to_string(shots.size() - skipped) + " shots (" + std::to_string(skipped) +
               " skipped, " + std::to_string(no_bounce) + " no-bounce shots without Shot IQ) into " +
               metrics_path.string());
}

void cmd_heatmap(const PipelineConfig& config, const Logger& log) {
  config.validate();
  const auto in_path = (fs::path(config.out_dir) / "shot_metrics.csv").string();
  const Table table = read_table(in_path);
  const int cx = table.column("bounce_x", in_path);
  const int cy = table.column("bounce_y", in_path);
  const int cv = table.column(config.heatmap_metric, in_path);
  std::vector<LocatedValue> values;
  for (const auto& row : table.rows) {
    if (row[cx].empty() || row[cv].empty()) continue;
    values.push_back({parse_double(row[cx]), parse_double(row[cy]), parse_double(row[cv])});
  }
  const auto cells = heatmap(values, config.grid);
  const fs::path out_path = fs::path(config.out_dir) / ("heatmap_" + config.heatmap_metric + ".csv");
  auto out = open_output(config, out_path);
  write_heatmap_csv(out, cells);
  finish(out, out_path);
  say(log, "binned " + std::to_string(values.size()) + " shots into " + out_path.string());
}

void run_command(std::string_view name, const PipelineConfig& config, const Logger& log) {
  if (name == "simulate") cmd_simulate(config, log);
  else if (name == "encode") cmd_encode(config, log);
  else if (name == "fit-gmm") cmd_fit_gmm(config, log);
  else if (name == "fit-outcome") cmd_fit_outcome(config, log);
  else if (name == "metrics") cmd_metrics(config, log);
  else if (name == "heatmap") cmd_heatmap(config, log);
  else throw InvalidArgument("unknown command '" + std::string(name) + "'");
}

}  // namespace shotvalue
