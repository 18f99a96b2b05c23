#include "monose3/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "monose3/errors.hpp"

namespace monose3 {

using nlohmann::json;

namespace {

std::string normalize_key(std::string key) {
  std::replace(key.begin(), key.end(), '-', '_');
  return key;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw Error(ErrorCode::InvalidConfig, "field '" + key + "': cannot parse '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "on" || value == "yes") return true;
  if (value == "0" || value == "false" || value == "off" || value == "no") return false;
  throw Error(ErrorCode::InvalidConfig, "field '" + key + "': expected on/off, got '" + value + "'");
}

[[noreturn]] void bad_field(const std::string& field, const std::string& why) {
  throw Error(ErrorCode::InvalidConfig, "field '" + field + "': " + why);
}

std::string fmt_num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// JSON cannot carry inf/nan; they are written as strings.
json json_num(double v) {
  if (std::isfinite(v)) return v;
  return fmt_num(v);
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                    : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::ofstream open_output(const RunConfig& cfg, const std::string& name,
                          std::vector<std::filesystem::path>& files) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.out, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create output directory " + cfg.out);
  const std::filesystem::path path = std::filesystem::path(cfg.out) / name;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::Io, "cannot open " + path.string());
  files.push_back(path);
  return os;
}

void write_json(const RunConfig& cfg, const std::string& name, const json& doc,
                std::vector<std::filesystem::path>& files) {
  std::ofstream os = open_output(cfg, name, files);
  os << doc.dump(2) << '\n';
  if (!os) throw Error(ErrorCode::Io, "failed writing " + name);
}

json metadata(const RunConfig& cfg, const std::string& command) {
  return json{{"tool", "monose3"},
              {"version", kVersion},
              {"command", command},
              {"seed", cfg.seed},
              {"config", cfg.to_json()}};
}

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return v[lo] + (v[hi] - v[lo]) * (pos - static_cast<double>(lo));
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

// ---------------------------------------------------------------------------
// RunConfig

void RunConfig::set(const std::string& raw_key, const std::string& value) {
  const std::string key = normalize_key(raw_key);
  if (key == "steps") steps = parse_number<int>(key, value);
  else if (key == "beta_start") beta_start = parse_number<double>(key, value);
  else if (key == "beta_end") beta_end = parse_number<double>(key, value);
  else if (key == "eta") eta = parse_number<double>(key, value);
  else if (key == "sigma_form") sigma_form = value;
  else if (key == "cz") cz = parse_number<double>(key, value);
  else if (key == "z_min") z_min = parse_number<double>(key, value);
  else if (key == "z_max") z_max = parse_number<double>(key, value);
  else if (key == "gamma") gamma = parse_number<double>(key, value);
  else if (key == "margin") margin = parse_number<double>(key, value);
  else if (key == "bound") bound = value;
  else if (key == "clamp") bound = parse_bool(key, value) ? "clamp" : "none";
  else if (key == "ddim_steps") ddim_steps = parse_number<int>(key, value);
  else if (key == "refine_steps") refine_steps = parse_number<int>(key, value);
  else if (key == "refine_timestep") refine_timestep = parse_number<int>(key, value);
  else if (key == "direct_iterations") direct_iterations = parse_number<int>(key, value);
  else if (key == "track_start") track_start = parse_number<int>(key, value);
  else if (key == "track_noise_t") track_noise_t = parse_number<int>(key, value);
  else if (key == "init") init = value;
  else if (key == "mode") mode = value;
  else if (key == "denoiser") denoiser = value;
  else if (key == "scenarios") scenarios = parse_number<int>(key, value);
  else if (key == "samples") samples = parse_number<int>(key, value);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "f_min") f_min = parse_number<double>(key, value);
  else if (key == "f_max") f_max = parse_number<double>(key, value);
  else if (key == "pixel_noise") pixel_noise = parse_number<double>(key, value);
  else if (key == "timesteps") timesteps = value;
  else if (key == "chain") chain = value;
  else if (key == "out") out = value;
  else if (key == "write_csv") write_csv = parse_bool(key, value);
  else if (key == "trajectories") trajectories = parse_bool(key, value);
  else if (key == "threads") threads = parse_number<int>(key, value);
  else throw Error(ErrorCode::InvalidConfig, "unknown config field '" + raw_key + "'");
}

void RunConfig::merge_json(const json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::InvalidConfig, "config must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (value.is_string()) {
      set(key, value.get<std::string>());
    } else if (value.is_boolean()) {
      set(key, value.get<bool>() ? "true" : "false");
    } else if (value.is_number_integer() || value.is_number_unsigned()) {
      set(key, value.dump());
    } else if (value.is_number_float()) {
      set(key, fmt_num(value.get<double>()));
    } else if (key == "chain" && value.is_null()) {
      chain.clear();
    } else if (key == "chain" && value.is_object()) {
      chain = value.dump();
    } else {
      bad_field(key, "unsupported JSON type");
    }
  }
}

json RunConfig::to_json() const {
  return json{{"steps", steps},
              {"beta_start", beta_start},
              {"beta_end", beta_end},
              {"eta", eta},
              {"sigma_form", sigma_form},
              {"cz", cz},
              {"z_min", z_min},
              {"z_max", z_max},
              {"gamma", gamma},
              {"margin", margin},
              {"bound", bound},
              {"ddim_steps", ddim_steps},
              {"refine_steps", refine_steps},
              {"refine_timestep", refine_timestep},
              {"direct_iterations", direct_iterations},
              {"track_start", track_start},
              {"track_noise_t", track_noise_t},
              {"init", init},
              {"mode", mode},
              {"denoiser", denoiser},
              {"scenarios", scenarios},
              {"samples", samples},
              {"seed", seed},
              {"f_min", f_min},
              {"f_max", f_max},
              {"pixel_noise", pixel_noise},
              {"timesteps", timesteps},
              {"chain", chain.empty() ? json(nullptr) : json::parse(chain_spec().to_json())}};
}

void RunConfig::validate() const {
  if (steps < 1) bad_field("steps", "must be >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    bad_field("beta_start/beta_end", "need 0 < beta_start <= beta_end < 1");
  }
  if (!(eta >= 0.0)) bad_field("eta", "must be >= 0");
  if (sigma_form != "absolute" && sigma_form != "standard") {
    bad_field("sigma_form", "must be absolute or standard");
  }
  if (!(0.0 < z_min && z_min < cz && cz < z_max)) bad_field("cz", "need 0 < z_min < cz < z_max");
  if (!(gamma > 0.0)) bad_field("gamma", "must be > 0");
  if (!(margin >= 0.0 && margin < 0.5)) bad_field("margin", "must lie in [0, 0.5)");
  if (bound != "clamp" && bound != "reject" && bound != "none") {
    bad_field("bound", "must be clamp, reject or none");
  }
  if (ddim_steps < 1 || ddim_steps > steps) bad_field("ddim_steps", "must lie in 1..steps");
  if (refine_steps < 0) bad_field("refine_steps", "must be >= 0");
  if (refine_timestep < 0 || refine_timestep > steps) {
    bad_field("refine_timestep", "must lie in 0..steps");
  }
  if (direct_iterations < 1) bad_field("direct_iterations", "must be >= 1");
  if (track_start < 1 || track_start > steps) bad_field("track_start", "must lie in 1..steps");
  if (track_noise_t < 0 || track_noise_t > steps) {
    bad_field("track_noise_t", "must lie in 0..steps");
  }
  if (init != "canonical" && init != "prior" && init != "previous") {
    bad_field("init", "must be canonical, prior or previous");
  }
  if (mode != "ddim" && mode != "direct" && mode != "tracking") {
    bad_field("mode", "must be ddim, direct or tracking");
  }
  try {
    denoiser_spec();
  } catch (const Error& e) {
    bad_field("denoiser", e.what());
  }
  if (scenarios < 1) bad_field("scenarios", "must be >= 1");
  if (samples < 1) bad_field("samples", "must be >= 1");
  if (!(f_min > 0.0 && f_min <= f_max)) bad_field("f_min/f_max", "need 0 < f_min <= f_max");
  if (!(pixel_noise >= 0.0)) bad_field("pixel_noise", "must be >= 0");
  if (threads < 0) bad_field("threads", "must be >= 0");
  try {
    timestep_list();
  } catch (const Error& e) {
    bad_field("timesteps", e.what());
  }
  if (!chain.empty()) {
    try {
      chain_spec();
    } catch (const Error& e) {
      bad_field("chain", e.what());
    }
  }
}

Schedule RunConfig::make_schedule() const {
  Schedule s = make_linear_schedule(steps, beta_start, beta_end);
  s.eta = eta;
  s.sigma_form = sigma_form == "standard" ? SigmaForm::Standard : SigmaForm::Absolute;
  return s;
}

NormConfig RunConfig::norm_config() const { return {cz, z_min, z_max}; }

NoiseScales RunConfig::noise_scales() const {
  return NoiseScales::from_gamma(gamma, norm_config());
}

FrustumBox RunConfig::frustum_box() const {
  return FrustumBox::from_config(norm_config(), margin);
}

BoundMode RunConfig::bound_mode() const {
  if (bound == "reject") return BoundMode::Reject;
  if (bound == "none") return BoundMode::None;
  return BoundMode::Clamp;
}

ScenarioRanges RunConfig::scenario_ranges() const {
  ScenarioRanges r;
  r.f_min = f_min;
  r.f_max = f_max;
  r.margin = margin;
  r.pixel_noise = pixel_noise;
  return r;
}

ChainSpec RunConfig::chain_spec() const {
  if (chain.empty()) return ChainSpec::franka_like();
  // Inline JSON is accepted so that recorded run metadata can be replayed.
  if (chain.front() == '{') return ChainSpec::from_json(chain);
  return ChainSpec::load(chain);
}

DenoiserSpec RunConfig::denoiser_spec() const { return DenoiserSpec::parse(denoiser); }

std::vector<int> RunConfig::timestep_list() const {
  std::vector<int> ts;
  if (timesteps == "all") {
    ts.resize(static_cast<std::size_t>(steps));
    std::iota(ts.begin(), ts.end(), 1);
    return ts;
  }
  std::stringstream ss(timesteps);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const int t = parse_number<int>("timesteps", item);
    if (t < 1 || t > steps) {
      throw Error(ErrorCode::InvalidConfig, "timestep " + item + " outside 1..steps");
    }
    ts.push_back(t);
  }
  if (ts.empty()) throw Error(ErrorCode::InvalidConfig, "empty timestep list");
  return ts;
}

// ---------------------------------------------------------------------------
// schedule

CommandResult cmd_schedule(const RunConfig& cfg) {
  cfg.validate();
  const Schedule sched = cfg.make_schedule();
  CommandResult res;

  bool decreasing = true;
  for (int t = 1; t <= sched.T; ++t) {
    decreasing = decreasing && sched.alpha_bar_at(t) < sched.alpha_bar_at(t - 1);
  }
  if (cfg.write_csv) {
    std::ofstream os = open_output(cfg, "schedule.csv", res.files);
    os << "t,beta,alpha_bar,sigma\n";
    for (int t = 1; t <= sched.T; ++t) {
      os << t << ',' << fmt_num(sched.beta_at(t)) << ',' << fmt_num(sched.alpha_bar_at(t)) << ','
         << fmt_num(std::sqrt(sched.sigma_sq(t, t - 1))) << '\n';
    }
    if (!os) throw Error(ErrorCode::Io, "failed writing schedule.csv");
  }
  res.summary = {{"metadata", metadata(cfg, "schedule")},
                 {"T", sched.T},
                 {"alpha_bar_1", sched.alpha_bar_at(1)},
                 {"alpha_bar_T", sched.alpha_bar_at(sched.T)},
                 {"alpha_bar_strictly_decreasing", decreasing}};
  res.exit_code = decreasing ? 0 : 1;
  write_json(cfg, "schedule.json", res.summary, res.files);
  return res;
}

// ---------------------------------------------------------------------------
// diffuse

namespace {

struct DiffuseCell {
  bool aborted = false;
  bool has_pose = false;
  bool in_frustum = false;
  NormalizedPose noisy;
  Vec9 standardized = Vec9::Zero();
  Vec2 uv_rel = Vec2::Zero();
  double depth = 0.0;
};

}  // namespace

CommandResult cmd_diffuse(const RunConfig& cfg) {
  cfg.validate();
  const Schedule sched = cfg.make_schedule();
  const NormConfig norm = cfg.norm_config();
  const NoiseScales scales = cfg.noise_scales();
  const FrustumBox box = cfg.frustum_box();
  const ChainSpec chain = cfg.chain_spec();
  const ScenarioRanges ranges = cfg.scenario_ranges();
  const std::vector<int> ts = cfg.timestep_list();
  DiffusionOptions opts;
  opts.bound = cfg.bound_mode();

  const std::size_t n = static_cast<std::size_t>(cfg.scenarios);
  std::vector<std::vector<DiffuseCell>> cells(n, std::vector<DiffuseCell>(ts.size()));
  const Vec9 s = scales.as_vector();

  parallel_for(n, cfg.threads, [&](std::size_t i) {
    const Scenario sc = generate_scenario(cfg.seed, i, ranges, chain, norm);
    const NormalizedPose n0 = normalize(sc.gt_pose, sc.intrinsics, norm);
    for (std::size_t k = 0; k < ts.size(); ++k) {
      DiffuseCell& cell = cells[i][k];
      const int t = ts[k];
      Rng rng = make_rng(cfg.seed, Stream::Diffusion,
                         i * static_cast<std::uint64_t>(sched.T + 1) + static_cast<std::uint64_t>(t));
      try {
        const DiffusionSample smp =
            diffuse_sample(sc.gt_pose, t, sched, scales, box, sc.intrinsics, norm, rng, opts);
        cell.noisy = smp.noisy;
        const double ab = sched.alpha_bar_at(t);
        cell.standardized = (smp.noisy.to_vector() - std::sqrt(ab) * n0.to_vector())
                                .cwiseQuotient(std::sqrt(1.0 - ab) * s);
        if (smp.pose) {
          cell.has_pose = true;
          cell.depth = smp.pose->t.z();
          const Vec2 uv = project_point(smp.pose->t, sc.intrinsics);
          cell.uv_rel = {uv.x() / sc.intrinsics.w, uv.y() / sc.intrinsics.h};
          cell.in_frustum = in_frustum(*smp.pose, sc.intrinsics, cfg.margin, norm.depth_range());
        }
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateRotation6D) throw;
        cell.aborted = true;
      }
    }
  });

  CommandResult res;
  if (cfg.write_csv) {
    std::ofstream os = open_output(cfg, "diffuse.csv", res.files);
    os << "scenario,t,tx_n,ty_n,tz_n,u_rel,v_rel,depth,in_frustum,aborted\n";
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < ts.size(); ++k) {
        const DiffuseCell& c = cells[i][k];
        os << i << ',' << ts[k] << ',' << fmt_num(c.noisy.tx_n) << ',' << fmt_num(c.noisy.ty_n)
           << ',' << fmt_num(c.noisy.tz_n) << ',';
        if (c.has_pose) {
          os << fmt_num(c.uv_rel.x()) << ',' << fmt_num(c.uv_rel.y()) << ',' << fmt_num(c.depth);
        } else {
          os << ",,";
        }
        os << ',' << (c.in_frustum ? 1 : 0) << ',' << (c.aborted ? 1 : 0) << '\n';
      }
    }
    if (!os) throw Error(ErrorCode::Io, "failed writing diffuse.csv");
  }

  std::size_t total = 0;
  std::size_t inside = 0;
  std::size_t aborted = 0;
  json per_t = json::array();
  for (std::size_t k = 0; k < ts.size(); ++k) {
    std::size_t t_inside = 0;
    std::size_t t_count = 0;
    Vec9 mean = Vec9::Zero();
    Vec9 res_mean = Vec9::Zero();
    Vec9 res_sq = Vec9::Zero();
    for (std::size_t i = 0; i < n; ++i) {
      const DiffuseCell& c = cells[i][k];
      if (c.aborted) {
        ++aborted;
        continue;
      }
      ++t_count;
      t_inside += c.in_frustum ? 1 : 0;
      mean += c.noisy.to_vector();
      res_mean += c.standardized;
      res_sq += c.standardized.cwiseProduct(c.standardized);
    }
    total += t_count;
    inside += t_inside;
    const double cnt = std::max<double>(1.0, static_cast<double>(t_count));
    mean /= cnt;
    res_mean /= cnt;
    const Vec9 res_std = (res_sq / cnt - res_mean.cwiseProduct(res_mean)).cwiseMax(0.0).cwiseSqrt();
    auto to_arr = [](const Vec9& v) {
      json a = json::array();
      for (int j = 0; j < 9; ++j) a.push_back(json_num(v(j)));
      return a;
    };
    per_t.push_back({{"t", ts[k]},
                     {"alpha_bar", sched.alpha_bar_at(ts[k])},
                     {"count", t_count},
                     {"in_frustum_rate", t_count ? static_cast<double>(t_inside) / t_count : 0.0},
                     {"component_mean", to_arr(mean)},
                     {"standardized_noise_mean", to_arr(res_mean)},
                     {"standardized_noise_std", to_arr(res_std)}});
  }
  const double rate = total ? static_cast<double>(inside) / static_cast<double>(total) : 0.0;
  const bool bounded = cfg.bound_mode() != BoundMode::None;
  const bool invariant_ok = !bounded || inside == total;
  res.summary = {{"metadata", metadata(cfg, "diffuse")},
                 {"samples", total},
                 {"aborted", aborted},
                 {"in_frustum_rate", rate},
                 {"visibility_invariant_ok", invariant_ok},
                 {"per_timestep", per_t}};
  res.exit_code = (aborted == 0 && invariant_ok) ? 0 : 1;
  write_json(cfg, "diffuse.json", res.summary, res.files);
  return res;
}

// ---------------------------------------------------------------------------
// estimate

std::vector<EstimateRecord> estimate_scenarios(const RunConfig& cfg) {
  cfg.validate();
  const Schedule sched = cfg.make_schedule();
  const NormConfig norm = cfg.norm_config();
  const NoiseScales scales = cfg.noise_scales();
  const FrustumBox box = cfg.frustum_box();
  const ChainSpec chain = cfg.chain_spec();
  const ScenarioRanges ranges = cfg.scenario_ranges();
  const DenoiserSpec denoiser = cfg.denoiser_spec();

  const std::size_t n = static_cast<std::size_t>(cfg.scenarios);
  std::vector<EstimateRecord> records(n);
  parallel_for(n, cfg.threads, [&](std::size_t i) {
    EstimateRecord& rec = records[i];
    rec.index = i;
    const Scenario sc = generate_scenario(cfg.seed, i, ranges, chain, norm);
    Rng obs_rng = make_rng(cfg.seed, Stream::Observation, i);
    const Observation obs =
        make_observation(sc.gt_pose, sc.intrinsics, chain, sc.joints, sc.pixel_noise, obs_rng);
    const std::vector<Vec3> keypoints = forward_kinematics(chain, sc.joints);

    try {
      ReverseConfig rcfg;
      rcfg.ddim_steps = cfg.ddim_steps;
      rcfg.refine_steps = cfg.refine_steps;
      rcfg.refine_timestep = cfg.refine_timestep;
      rcfg.init_mode = cfg.init == "prior"      ? InitMode::PriorSample
                       : cfg.init == "previous" ? InitMode::PreviousEstimate
                                                : InitMode::Canonical;
      if (cfg.mode == "tracking") {
        rcfg.init_mode = InitMode::PreviousEstimate;
        rcfg.ddim_steps = 1;
        rcfg.refine_steps = 0;
        rcfg.start_timestep = cfg.track_start;
      }
      if (rcfg.init_mode == InitMode::PreviousEstimate) {
        // The previous frame's estimate: ground truth, optionally perturbed.
        rcfg.previous = sc.gt_pose;
        if (cfg.track_noise_t > 0) {
          Rng init_rng = make_rng(cfg.seed, Stream::Init, i);
          rcfg.previous = diffuse(sc.gt_pose, cfg.track_noise_t, sched, scales, box,
                                  sc.intrinsics, norm, init_rng);
        }
      }

      Rng rng = make_rng(cfg.seed, Stream::Denoiser, i);
      const auto start = std::chrono::steady_clock::now();
      ReverseResult rr =
          cfg.mode == "direct"
              ? run_direct_regression(obs, chain, norm, sched, scales, box, rcfg,
                                      cfg.direct_iterations, denoiser, rng)
              : run_reverse(obs, chain, norm, sched, scales, box, rcfg, denoiser, rng);
      rec.estimator_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      rec.add = add_metric(sc.gt_pose, rr.pose, keypoints);
      rec.steps = static_cast<int>(rr.trajectory.steps.size());
      rec.clamp_events = rr.clamp_events;
      rec.trajectory = std::move(rr.trajectory);
    } catch (const Error& e) {
      rec.aborted = true;
      rec.reason = std::string(to_string(e.code())) + ": " + e.what();
    }
  });
  return records;
}

CommandResult cmd_estimate(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<EstimateRecord> records = estimate_scenarios(cfg);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  CommandResult res;
  std::vector<double> adds;
  std::size_t aborted = 0;
  long clamp_events = 0;
  json abort_list = json::array();
  double estimator_seconds = 0.0;
  for (const EstimateRecord& r : records) {
    estimator_seconds += r.estimator_seconds;
    if (r.aborted) {
      ++aborted;
      abort_list.push_back({{"scenario", r.index}, {"reason", r.reason}});
    } else {
      adds.push_back(r.add);
      clamp_events += r.clamp_events;
    }
  }

  if (cfg.write_csv) {
    std::ofstream os = open_output(cfg, "estimate.csv", res.files);
    os << "scenario,mode,add,steps,clamp_events,aborted,reason\n";
    for (const EstimateRecord& r : records) {
      os << r.index << ',' << cfg.mode << ',' << (r.aborted ? "" : fmt_num(r.add)) << ','
         << r.steps << ',' << r.clamp_events << ',' << (r.aborted ? 1 : 0) << ',' << '"'
         << r.reason << '"' << '\n';
    }
    if (!os) throw Error(ErrorCode::Io, "failed writing estimate.csv");
  }
  if (cfg.trajectories) {
    std::ofstream os = open_output(cfg, "trajectories.csv", res.files);
    os << "scenario,step,phase,t,r00,r01,r02,r10,r11,r12,r20,r21,r22,tx,ty,tz,add\n";
    for (const EstimateRecord& r : records) {
      for (std::size_t k = 0; k < r.trajectory.steps.size(); ++k) {
        const TrajectoryStep& s = r.trajectory.steps[k];
        os << r.index << ',' << k << ',' << (s.phase == Phase::Ddim ? "ddim" : "refine") << ','
           << s.t;
        for (int a = 0; a < 3; ++a) {
          for (int b = 0; b < 3; ++b) os << ',' << fmt_num(s.pose_out.R(a, b));
        }
        for (int a = 0; a < 3; ++a) os << ',' << fmt_num(s.pose_out.t(a));
        os << ',' << (s.add ? fmt_num(*s.add) : std::string()) << '\n';
      }
    }
  }

  const AucGrid grid;
  const double abort_rate = static_cast<double>(aborted) / static_cast<double>(records.size());
  res.summary = {{"metadata", metadata(cfg, "estimate")},
                 {"mode", cfg.mode},
                 {"denoiser", cfg.denoiser},
                 {"scenarios", records.size()},
                 {"completed", adds.size()},
                 {"aborted", aborted},
                 {"abort_rate", abort_rate},
                 {"aborts", abort_list},
                 {"clamp_events", clamp_events},
                 {"auc_rule",
                  {{"t_min_m", grid.t_min},
                   {"t_max_m", grid.t_max},
                   {"n_thresholds", grid.n_thresholds},
                   {"spacing", "linear"},
                   {"comparison", "add <= threshold"}}}};
  if (!adds.empty()) {
    res.summary["auc"] = auc(adds, grid);
    res.summary["mean_add_m"] = mean_of(adds);
    res.summary["median_add_m"] = percentile(adds, 0.5);
  } else {
    res.summary["auc"] = nullptr;
    res.summary["mean_add_m"] = nullptr;
    res.summary["median_add_m"] = nullptr;
  }
  res.summary["status"] = aborted == 0 ? "ok" : (abort_rate > 0.001 ? "failed" : "degraded");
  res.exit_code = aborted == 0 ? 0 : 1;
  write_json(cfg, "estimate.json", res.summary, res.files);

  // Wall-clock numbers live in their own file so the summary stays
  // byte-reproducible.
  write_json(cfg, "estimate_timing.json",
             json{{"runtime_s", seconds},
                  {"per_scenario_ms", 1000.0 * seconds / static_cast<double>(records.size())},
                  {"estimator_per_scenario_ms",
                   1000.0 * estimator_seconds / static_cast<double>(records.size())}},
             res.files);
  res.summary["runtime_s"] = seconds;
  return res;
}

// ---------------------------------------------------------------------------
// trainsim

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw Error(ErrorCode::InvalidRange, "spearman needs two equal-length series (n >= 2)");
  }
  auto ranks = [](std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const std::vector<double> rx = ranks(x);
  const std::vector<double> ry = ranks(y);
  const double mx = mean_of(rx);
  const double my = mean_of(ry);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

CommandResult cmd_trainsim(const RunConfig& cfg) {
  cfg.validate();
  const Schedule sched = cfg.make_schedule();
  const NormConfig norm = cfg.norm_config();
  const NoiseScales scales = cfg.noise_scales();
  const FrustumBox box = cfg.frustum_box();
  const ChainSpec chain = cfg.chain_spec();
  const ScenarioRanges ranges = cfg.scenario_ranges();
  const DenoiserSpec denoiser = cfg.denoiser_spec();
  DiffusionOptions opts;
  opts.bound = cfg.bound_mode();

  struct Sample {
    int t = 0;
    LossTerms loss;
    bool aborted = false;
    std::string reason;
  };
  const std::size_t n = static_cast<std::size_t>(cfg.samples);
  std::vector<Sample> samples(n);
  parallel_for(n, cfg.threads, [&](std::size_t k) {
    Sample& smp = samples[k];
    const Scenario sc = generate_scenario(cfg.seed, k, ranges, chain, norm);
    Rng t_rng = make_rng(cfg.seed, Stream::Timestep, k);
    smp.t = sample_timestep(sched.T, t_rng);
    try {
      Rng d_rng = make_rng(cfg.seed, Stream::Diffusion, k);
      const Pose noisy = diffuse(sc.gt_pose, smp.t, sched, scales, box, sc.intrinsics, norm,
                                 d_rng, opts);
      Rng obs_rng = make_rng(cfg.seed, Stream::Observation, k);
      const Observation obs =
          make_observation(sc.gt_pose, sc.intrinsics, chain, sc.joints, sc.pixel_noise, obs_rng);
      Rng p_rng = make_rng(cfg.seed, Stream::Denoiser, k);
      const DenoiserOutput out = predict(noisy, smp.t, obs, denoiser, sched, p_rng);
      const std::vector<Vec3> pts = loss_points(chain, sc.joints);
      smp.loss = decomposed_loss(sc.gt_pose, noisy, out, pts, sc.intrinsics);
    } catch (const Error& e) {
      smp.aborted = true;
      smp.reason = std::string(to_string(e.code())) + ": " + e.what();
    }
  });

  CommandResult res;
  if (cfg.write_csv) {
    std::ofstream os = open_output(cfg, "trainsim.csv", res.files);
    os << "sample,t,loss_xy,loss_rot,loss_z,loss_total,aborted\n";
    for (std::size_t k = 0; k < n; ++k) {
      const Sample& s = samples[k];
      os << k << ',' << s.t << ',' << fmt_num(s.loss.xy) << ',' << fmt_num(s.loss.rot) << ','
         << fmt_num(s.loss.z) << ',' << fmt_num(s.loss.total) << ',' << (s.aborted ? 1 : 0)
         << '\n';
    }
    if (!os) throw Error(ErrorCode::Io, "failed writing trainsim.csv");
  }

  const int n_bins = std::min(10, sched.T);
  std::vector<std::vector<const Sample*>> bins(static_cast<std::size_t>(n_bins));
  std::size_t aborted = 0;
  double max_total = 0.0;
  for (const Sample& s : samples) {
    if (s.aborted) {
      ++aborted;
      continue;
    }
    const auto b = static_cast<std::size_t>((s.t - 1) * n_bins / sched.T);
    bins[b].push_back(&s);
    max_total = std::max(max_total, s.loss.total);
  }

  json bin_stats = json::array();
  std::vector<double> bin_idx;
  std::vector<double> bin_mean;
  for (int b = 0; b < n_bins; ++b) {
    const auto& bucket = bins[static_cast<std::size_t>(b)];
    std::vector<double> xy, rot, z, total;
    for (const Sample* s : bucket) {
      xy.push_back(s->loss.xy);
      rot.push_back(s->loss.rot);
      z.push_back(s->loss.z);
      total.push_back(s->loss.total);
    }
    const int t_lo = b * sched.T / n_bins + 1;
    const int t_hi = (b + 1) * sched.T / n_bins;
    json entry = {{"t_lo", t_lo}, {"t_hi", t_hi}, {"count", bucket.size()}};
    if (!bucket.empty()) {
      entry["mean_xy"] = mean_of(xy);
      entry["mean_rot"] = mean_of(rot);
      entry["mean_z"] = mean_of(z);
      entry["mean_total"] = mean_of(total);
      entry["p50_total"] = percentile(total, 0.5);
      entry["p90_total"] = percentile(total, 0.9);
      bin_idx.push_back(b);
      bin_mean.push_back(mean_of(total));
    }
    bin_stats.push_back(entry);
  }

  const bool perfect = denoiser.kind == DenoiserSpec::Kind::Perfect;
  const bool invariant_ok = !perfect || max_total < 1e-9;
  res.summary = {{"metadata", metadata(cfg, "trainsim")},
                 {"samples", n},
                 {"aborted", aborted},
                 {"max_total_loss", max_total},
                 {"bins", bin_stats},
                 {"perfect_targets_invariant_ok", invariant_ok}};
  res.summary["spearman_t_vs_mean_total"] =
      bin_idx.size() >= 2 ? json_num(spearman(bin_idx, bin_mean)) : json(nullptr);
  res.exit_code = (aborted == 0 && invariant_ok) ? 0 : 1;
  write_json(cfg, "trainsim.json", res.summary, res.files);
  return res;
}

CommandResult run_command(const RunConfig& cfg, const std::string& command) {
  if (command == "schedule") return cmd_schedule(cfg);
  if (command == "diffuse") return cmd_diffuse(cfg);
  if (command == "estimate") return cmd_estimate(cfg);
  if (command == "trainsim") return cmd_trainsim(cfg);
  throw Error(ErrorCode::InvalidConfig, "unknown command '" + command + "'");
}

}  // namespace monose3
