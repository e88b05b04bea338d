#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "shotvalue/shotvalue.h"

namespace {

int report(sv_status status) {
  std::string msg = sv_last_error();
  for (char& c : msg) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  std::fprintf(stderr, "shotvalue: %s: %s\n", sv_status_name(status), msg.c_str());
  return status == SV_CONFIG_ERROR ? 2 : 1;
}

void print_line(const char* line, void*) { std::fprintf(stderr, "%s\n", line); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Expected shot value pipeline for tennis tracking data"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool no_timestamp = false;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "Flat key = value config file");
  auto* seed_opt = app.add_option("--seed", seed, "Global seed");
  app.add_option("--out", out_dir, "Output directory");
  app.add_flag("--no-timestamp", no_timestamp, "Omit the generated-at header line from CSV outputs");
  app.add_option("--set", overrides, "Extra config entries as key=value")->take_all();

  struct Command {
    const char* name;
    const char* help;
  };
  const Command commands[] = {
      {"simulate", "Generate a synthetic tracking corpus with ground truth"},
      {"encode", "Fit functional encodings and outcome features"},
      {"fit-gmm", "Fit one mixture per shot type and bounce flag"},
      {"fit-outcome", "Fit the serve and rally outcome models"},
      {"metrics", "Score every shot and aggregate VAST, Shot IQ and VACC"},
      {"heatmap", "Bin a per-shot metric by bounce location"},
  };
  for (const auto& c : commands) app.add_subcommand(c.name, c.help)->fallthrough();

  std::string shot_id;
  double t = 0.0;
  auto* esv = app.add_subcommand("esv", "ESV of one shot from the samples seen up to time t")->fallthrough();
  esv->add_option("--shot", shot_id, "Shot id")->required();
  esv->add_option("--t", t, "Seconds since impact")->required();

  std::string metric;
  double cell_size = 0.0;
  auto* heat = app.get_subcommand("heatmap");
  heat->add_option("--metric", metric, "vast, vacc, shot_iq or pointwise");
  heat->add_option("--cell-size", cell_size, "Cell edge in meters");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  sv_config* config = nullptr;
  sv_status s = config_path.empty() ? sv_config_new(&config) : sv_config_load(config_path.c_str(), &config);
  if (s != SV_OK) return report(s);

  auto set = [&](const std::string& key, const std::string& value) {
    if (s == SV_OK) s = sv_config_set(config, key.c_str(), value.c_str());
  };
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "shotvalue: config error: --set expects key=value, got '%s'\n", kv.c_str());
      sv_config_free(config);
      return 2;
    }
    set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (*seed_opt) set("seed", std::to_string(seed));
  if (!out_dir.empty()) set("out_dir", out_dir);
  if (no_timestamp) set("timestamp", "false");
  if (!metric.empty()) set("heatmap.metric", metric);
  if (cell_size != 0.0) set("heatmap.cell_size", std::to_string(cell_size));

  if (s == SV_OK) {
    const std::string command = app.get_subcommands().front()->get_name();
    if (command == "esv") {
      sv_estimate e{};
      s = sv_esv(config, shot_id.c_str(), t, &e);
      if (s == SV_OK) {
        std::printf("shot_id,t,mean,se,n,error_fraction\n%s,%.15g,%.17g,%.17g,%zu,%.17g\n", shot_id.c_str(), t, e.mean,
                    e.se, e.n, e.error_fraction);
      }
    } else {
      s = sv_run(config, command.c_str(), print_line, nullptr);
    }
  }
  sv_config_free(config);
  return s == SV_OK ? 0 : report(s);
}
