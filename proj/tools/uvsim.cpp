// uvsim: command-line harness around the experiment runner.
//
//   uvsim <command> [--config FILE] [--key.path VALUE | --key.path=VALUE]...
//
// Overrides address config fields by dotted path and are applied on top of
// the config file in command-line order. Exit codes: 0 success, 1 bad
// configuration or usage, 2 unreadable or malformed input data, 3 internal
// invariant failure.
#include <cstdio>
#include <exception>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "uvsim/config.hpp"
#include "uvsim/errors.hpp"
#include "uvsim/experiment.hpp"

namespace {

using ojson = nlohmann::ordered_json;

void print_usage(std::FILE* out) {
  std::fprintf(out,
               "usage: uvsim <command> [--config FILE] [--key.path VALUE]...\n"
               "\n"
               "commands:\n"
               "  golden     error-free reference run on the test split\n"
               "  sweep      accuracy/energy sweep over policies and rails,\n"
               "             plus the analytic stall-policy energy curve\n"
               "  tune       characterize error rates, then assign per-layer\n"
               "             voltages for each error budget\n"
               "  select     pick the lowest-energy budget whose validation\n"
               "             accuracy loss stays under the bar\n"
               "  variation  re-tune across fabricated chip samples and report\n"
               "             the savings distribution\n"
               "  compare    zero-skip and tuned-voltage arms, separately and\n"
               "             combined\n"
               "\n"
               "Overrides use the config document's dotted paths, for example\n"
               "  --voltage.r_min 0.7   --array.zero_skip=true   --seed 7\n"
               "Values parse as JSON when possible, otherwise as strings.\n"
               "Each command writes report.json (and sweep.csv or tuned.csv\n"
               "where applicable) into output_dir.\n");
}

ojson load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw uvsim::config_error("cannot open config file '" + path + "'");
  try {
    return ojson::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw uvsim::config_error("config file '" + path + "': " + e.what());
  }
}

void print_summary(const ojson& report, const uvsim::Config& config) {
  if (report.contains("runs")) {
    for (const auto& run : report.at("runs")) {
      std::printf("%-36s accuracy %.4f  savings %+.4f\n",
                  run.at("label").get<std::string>().c_str(),
                  run.at("accuracy").get<double>(),
                  run.at("savings").get<double>());
    }
  }
  if (report.contains("mean_savings"))
    std::printf("mean savings over %d chips: %.4f (stddev %.4f)\n",
                config.chips, report.at("mean_savings").get<double>(),
                report.at("stddev_savings").get<double>());
  if (report.contains("selected") && report.at("selected").is_null())
    std::printf("no candidate met the accuracy bar; nominal design kept\n");
  std::printf("report written to %s/report.json\n", config.output_dir.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  if (args.empty()) {
    print_usage(stderr);
    return 1;
  }
  if (args[0] == "--help" || args[0] == "-h") {
    print_usage(stdout);
    return 0;
  }

  try {
    const std::string command = args[0];
    std::string config_path;
    std::vector<std::pair<std::string, std::string>> overrides;
    for (size_t i = 1; i < args.size(); ++i) {
      std::string arg = args[i];
      if (arg == "--help" || arg == "-h") {
        print_usage(stdout);
        return 0;
      }
      if (arg.rfind("--", 0) != 0)
        throw uvsim::config_error("unexpected argument '" + arg +
                                  "' (overrides start with --)");
      arg.erase(0, 2);
      std::string value;
      if (const size_t eq = arg.find('='); eq != std::string::npos) {
        value = arg.substr(eq + 1);
        arg.erase(eq);
      } else {
        if (++i == args.size())
          throw uvsim::config_error("missing value for --" + arg);
        value = args[i];
      }
      if (arg == "config")
        config_path = value;
      else
        overrides.emplace_back(arg, value);
    }

    ojson doc = config_path.empty() ? ojson::object()
                                    : load_config_file(config_path);
    for (const auto& [key, value] : overrides)
      uvsim::apply_override(doc, key, value);
    const uvsim::Config config = uvsim::config_from_json(doc);

    const ojson report = uvsim::run_experiment(command, config);
    print_summary(report, config);
    return 0;
  } catch (const uvsim::config_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const uvsim::data_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 3;
  }
}
