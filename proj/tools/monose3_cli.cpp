// Command-line front end. Every option maps onto a run-config field; values
// given on the command line override those read from --config.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "monose3/monose3.h"

namespace {

struct FieldOption {
  const char* flag;
  const char* help;
};

// Fields shared by all subcommands.
const std::vector<FieldOption> kCommonFields = {
    {"steps", "number of diffusion timesteps T"},
    {"beta-start", "first value of the linear beta schedule"},
    {"beta-end", "last value of the linear beta schedule"},
    {"eta", "stochasticity of the reverse update"},
    {"sigma-form", "sigma expression: absolute or standard"},
    {"cz", "depth offset c_z in meters"},
    {"z-min", "nearest admissible depth in meters"},
    {"z-max", "farthest admissible depth in meters"},
    {"gamma", "noise scale divisor"},
    {"margin", "frustum margin as a fraction of the image"},
    {"bound", "translation bound handling: clamp, reject or none"},
    {"clamp", "shorthand for --bound clamp (on) or --bound none (off)"},
    {"seed", "master seed"},
    {"scenarios", "number of scenarios"},
    {"f-min", "smallest focal length in pixels"},
    {"f-max", "largest focal length in pixels"},
    {"pixel-noise", "keypoint observation noise in pixels"},
    {"chain", "robot chain JSON file"},
    {"out", "output directory"},
    {"write-csv", "write per-row CSV files (on/off)"},
    {"threads", "worker threads, 0 for all cores"},
};

const std::map<std::string, std::vector<FieldOption>> kCommandFields = {
    {"schedule", {}},
    {"diffuse", {{"timesteps", "'all' or a comma separated list of t"}}},
    {"estimate",
     {{"ddim-steps", "number of DDIM steps"},
      {"refine-steps", "number of refinement steps"},
      {"refine-timestep", "timestep used by refinement steps"},
      {"direct-iterations", "iterations of direct regression"},
      {"track-start", "starting timestep in tracking mode"},
      {"track-noise-t", "diffusion level applied to the previous estimate"},
      {"init", "initial pose: canonical, prior or previous"},
      {"mode", "ddim, direct or tracking"},
      {"denoiser", "perfect, noisy:<sigma0> or biased:<b>"},
      {"trajectories", "write per-step trajectories (on/off)"}}},
    {"trainsim",
     {{"samples", "number of training samples"},
      {"denoiser", "perfect, noisy:<sigma0> or biased:<b>"}}},
};

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

int fail(ms3_status st) {
  std::cerr << "error (" << ms3_status_name(st) << "): " << ms3_last_error() << '\n';
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monocular SE(3) pose diffusion toolkit"};
  app.set_version_flag("--version", std::string(ms3_version()));
  app.require_subcommand(1);

  struct Bound {
    CLI::App* sub;
    std::string config_path;
    std::map<std::string, std::string> values;
  };
  std::map<std::string, Bound> subs;

  const std::map<std::string, std::string> descriptions = {
      {"schedule", "write the noise schedule"},
      {"diffuse", "forward-diffuse scenario poses and check the frustum bounds"},
      {"estimate", "run pose estimation over generated scenarios"},
      {"trainsim", "evaluate the training loss decomposition on sampled pairs"},
  };

  for (const auto& [name, extra] : kCommandFields) {
    Bound& b = subs[name];
    b.sub = app.add_subcommand(name, descriptions.at(name));
    b.sub->add_option("--config", b.config_path, "JSON config file")->check(CLI::ExistingFile);
    auto add = [&](const FieldOption& f) {
      b.sub->add_option(std::string("--") + f.flag, b.values[f.flag], f.help);
    };
    for (const auto& f : kCommonFields) add(f);
    for (const auto& f : extra) add(f);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  for (auto& [name, b] : subs) {
    if (!b.sub->parsed()) continue;

    ms3_run_config* cfg = nullptr;
    ms3_status st = ms3_run_config_create(&cfg);
    if (st != MS3_OK) return fail(st);

    if (!b.config_path.empty()) {
      std::string text;
      try {
        text = read_file(b.config_path);
      } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        ms3_run_config_destroy(cfg);
        return 2;
      }
      st = ms3_run_config_merge_json(cfg, text.c_str());
      if (st != MS3_OK) {
        ms3_run_config_destroy(cfg);
        return fail(st);
      }
    }
    for (const auto& [flag, value] : b.values) {
      if (b.sub->count("--" + flag) == 0) continue;
      st = ms3_run_config_set(cfg, flag.c_str(), value.c_str());
      if (st != MS3_OK) {
        ms3_run_config_destroy(cfg);
        return fail(st);
      }
    }

    ms3_run_result* res = nullptr;
    st = ms3_run(cfg, name.c_str(), &res);
    ms3_run_config_destroy(cfg);
    if (st != MS3_OK) return fail(st);

    std::cout << ms3_run_result_summary(res) << '\n';
    const int code = ms3_run_result_exit_code(res);
    ms3_run_result_destroy(res);
    return code;
  }
  return 2;
}
