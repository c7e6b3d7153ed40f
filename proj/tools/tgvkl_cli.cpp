// tgvkl: degrade, restore, sweep-lambda, metrics, phantom.
//
// Exit codes: 0 success, 2 configuration/usage error, 3 I/O error,
// 4 solver failure.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "tgvkl/config.hpp"
#include "tgvkl/tgvkl.hpp"

namespace fs = std::filesystem;
using namespace tgvkl;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitSolver = 4;

struct Shared {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  int jobs = 0;  // 0: take from config
};

void add_shared(CLI::App* app, Shared& s) {
  app->add_option("--config", s.config_path, "key=value configuration file");
  app->add_option("--set", s.sets, "override one config entry, key=value (repeatable)");
  app->add_option("--seed", s.seed, "noise seed (overrides config)");
  app->add_option("--out", s.out, "output directory")->capture_default_str();
  app->add_option("--jobs", s.jobs, "worker threads for independent inputs");
}

/// defaults < base_text (e.g. provenance of a degrade run) < --config < --set/--seed.
RunConfig build_config(const Shared& s, const std::string& base_text = {}) {
  RunConfig c;
  if (!base_text.empty()) c.load_text(base_text, "provenance");
  if (!s.config_path.empty()) c.load_file(s.config_path);
  for (const std::string& kv : s.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    c.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (s.seed) c.degrade.seed = *s.seed;
  if (s.jobs != 0) c.jobs = s.jobs;
  c.finalize();
  return c;
}

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string fmt4(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

void write_text(const fs::path& p, const std::string& text) {
  detail::write_file_bytes(p, text);
}

std::string read_text_if_exists(const fs::path& p) {
  std::error_code ec;
  if (!fs::is_regular_file(p, ec)) return {};
  return detail::read_file_bytes(p);
}

void make_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create directory " + p.string() + ": " + ec.message());
}

int exit_code_of(const std::exception_ptr& ep, std::string& message) {
  try {
    std::rethrow_exception(ep);
  } catch (const ConfigError& e) {
    message = std::string("config error: ") + e.what();
    return kExitConfig;
  } catch (const IoError& e) {
    message = std::string("I/O error: ") + e.what();
    return kExitIo;
  } catch (const SolverError& e) {
    message = std::string("solver failure: ") + e.what();
    return kExitSolver;
  } catch (const std::domain_error& e) {
    message = std::string("solver failure: ") + e.what();
    return kExitSolver;
  } catch (const std::invalid_argument& e) {
    message = std::string("invalid input: ") + e.what();
    return kExitConfig;
  } catch (const std::exception& e) {
    message = std::string("error: ") + e.what();
    return kExitSolver;
  }
}

/// Runs jobs on `threads` workers; reports each job's result in job order.
/// Returns the exit code of the first failing job, or 0.
int run_jobs(std::size_t count, int threads, const std::function<std::string(std::size_t)>& job) {
  std::vector<std::string> output(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        output[i] = job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(threads), count);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  int code = 0;
  for (std::size_t i = 0; i < count; ++i) {
    if (errors[i]) {
      std::string msg;
      const int c = exit_code_of(errors[i], msg);
      std::fprintf(stderr, "%s\n", msg.c_str());
      if (code == 0) code = c;
    } else {
      std::fputs(output[i].c_str(), stdout);
    }
  }
  return code;
}

Image load_clean(const std::string& source) {
  constexpr std::string_view prefix = "phantom:";
  if (source.rfind(prefix, 0) == 0) {
    std::size_t size = 0;
    const std::string rest = source.substr(prefix.size());
    const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), size);
    if (ec != std::errc() || ptr != rest.data() + rest.size() || size < 4) {
      throw ConfigError("bad phantom size in '" + source + "'");
    }
    const Image base = make_phantom(225);
    return size == 225 ? base : resample_area(base, size, size);
  }
  return read_unit_image(source);
}

std::string input_name(const std::string& source) {
  if (source.rfind("phantom:", 0) == 0) return "phantom_" + source.substr(8);
  fs::path p(source);
  if (fs::is_directory(p)) return p.filename().string();
  return p.stem().string();
}

/// A restore/sweep input: a b image file, or a degrade output directory.
struct DataInput {
  Image b;
  std::optional<Image> truth;
  std::string base_config;
};

DataInput load_data(const std::string& source, const std::string& truth_path) {
  DataInput in;
  const fs::path p(source);
  std::error_code ec;
  if (fs::is_directory(p, ec)) {
    in.b = read_image(p / "b.csv");
    in.base_config = read_text_if_exists(p / "provenance.txt");
    if (truth_path.empty() && fs::is_regular_file(p / "truth.csv", ec)) {
      in.truth = read_image(p / "truth.csv");
    }
  } else {
    in.b = read_image(p);
  }
  if (!truth_path.empty()) in.truth = read_image(truth_path);
  if (in.truth) require_same_dims(in.truth->dims(), in.b.dims(), "truth");
  return in;
}

fs::path job_dir(const Shared& s, std::size_t count, const std::string& name) {
  return count > 1 ? fs::path(s.out) / name : fs::path(s.out);
}

// ---------------------------------------------------------------------------

struct DegradeArgs {
  std::vector<std::string> inputs;
  std::vector<double> kappas;
};

int cmd_degrade(const Shared& s, const DegradeArgs& a) {
  const RunConfig base = build_config(s);
  std::vector<double> kappas = a.kappas;
  if (kappas.empty()) kappas.push_back(base.degrade.kappa);
  struct Job {
    std::string input;
    double kappa;
    std::string name;
  };
  std::vector<Job> jobs;
  for (const auto& in : a.inputs) {
    for (double k : kappas) {
      std::string name = input_name(in);
      if (kappas.size() > 1) name += "_k" + fmt(k);
      jobs.push_back({in, k, name});
    }
  }
  return run_jobs(jobs.size(), base.jobs, [&](std::size_t i) {
    const Job& j = jobs[i];
    RunConfig c = base;
    c.degrade.kappa = j.kappa;
    c.finalize();
    const Image clean = load_clean(j.input);
    const BccbOperator blur(gaussian_psf(c.degrade.band, c.degrade.sigma), clean.dims());
    const Degraded d = degrade(clean, blur, c.degrade);
    const fs::path dir = job_dir(s, jobs.size(), j.name);
    make_dir(dir);
    WriteOptions wo;
    const double bmax = *std::max_element(d.b.begin(), d.b.end());
    wo.maxval = bmax > 255.0 ? 65535 : 255;
    wo.sidecar = bmax > 65535.0;
    write_image(d.b, dir / "b.pgm", ImageFormat::PgmBinary, wo);
    write_csv(d.b, dir / "b.csv");
    write_csv(d.y, dir / "y.csv");
    write_csv(scaled(clean, c.degrade.kappa), dir / "truth.csv");
    std::string prov = "# tgvkl degrade\n# input=" + j.input + "\n# rows=" +
                       std::to_string(clean.rows()) + " cols=" + std::to_string(clean.cols()) +
                       "\n# config_hash=" + c.hash() + "\n" + c.to_text();
    write_text(dir / "provenance.txt", prov);
    return "degraded " + j.input + " kappa=" + fmt(c.degrade.kappa) + " seed=" +
           std::to_string(c.degrade.seed) + " -> " + dir.string() + "\n";
  });
}

// ---------------------------------------------------------------------------

struct RestoreArgs {
  std::vector<std::string> inputs;
  std::string truth;
  bool init_only = false;
  std::vector<double> fixed_alphas;
  std::optional<double> fixed_lambda;
};

void write_estimate(const Image& u, const fs::path& dir, const std::string& stem) {
  write_csv(u, dir / (stem + ".csv"));
  WriteOptions wo;
  wo.maxval = 65535;
  wo.sidecar = true;
  write_image(u, dir / (stem + ".pgm"), ImageFormat::PgmBinary, wo);
}

int cmd_restore(const Shared& s, const RestoreArgs& a) {
  if (a.fixed_lambda && a.fixed_alphas.empty()) {
    throw ConfigError("--fixed-lambda needs --fixed-alphas (the full scheme selects lambda)");
  }
  if (a.init_only && !a.fixed_alphas.empty()) {
    throw ConfigError("--init-only and --fixed-alphas are exclusive");
  }
  if (!a.truth.empty() && a.inputs.size() > 1) {
    throw ConfigError("--truth applies to a single input");
  }
  const RunConfig probe = build_config(s);
  return run_jobs(a.inputs.size(), probe.jobs, [&](std::size_t i) {
    const std::string& source = a.inputs[i];
    const DataInput in = load_data(source, a.truth);
    const RunConfig c = build_config(s, in.base_config);
    const fs::path dir = job_dir(s, a.inputs.size(), input_name(source));
    make_dir(dir);

    const Image gamma(in.b.dims(), c.degrade.gamma);
    const BccbOperator blur(gaussian_psf(c.degrade.band, c.degrade.sigma), in.b.dims());
    OuterOptions opts = c.outer;
    if (in.truth) opts.inner.monitor = Monitor{*in.truth, c.effective_dynamic_range(), c.ssim_every};
    const double nan = std::numeric_limits<double>::quiet_NaN();
    auto quality = [&](const Image& u) -> std::pair<double, double> {
      if (!in.truth) return {nan, nan};
      return {isnr(in.b, *in.truth, u), ssim(*in.truth, u, c.effective_dynamic_range())};
    };
    auto stamp = [&](RunTrace& t) {
      t.set_metadata("seed", std::to_string(c.degrade.seed));
      t.set_metadata("config_hash", c.hash());
    };

    std::vector<std::pair<std::string, std::string>> summary;
    auto put = [&](const std::string& k, const std::string& v) { summary.emplace_back(k, v); };
    put("input", source);
    put("config_hash", c.hash());
    const auto t0 = std::chrono::steady_clock::now();
    auto flush_summary = [&] {
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::string text;
      for (const auto& [k, v] : summary) text += k + "=" + v + "\n";
      text += "wall_time_s=" + fmt(secs) + "\n";
      write_text(dir / "summary.txt", text);
    };

    if (!a.fixed_alphas.empty()) {
      if (a.fixed_alphas.size() != 2) throw ConfigError("--fixed-alphas takes two values");
      SolveOptions so = opts.inner;
      so.fixed_lambda = a.fixed_lambda;
      put("mode", a.fixed_lambda ? "fixed_alphas_fixed_lambda" : "fixed_alphas");
      TgvResult r;
      try {
        r = admm_tgv_kl(in.b, gamma, blur, a.fixed_alphas[0], a.fixed_alphas[1], so);
      } catch (...) {
        put("status", "failed");
        flush_summary();
        throw;
      }
      stamp(r.trace);
      r.trace.write_csv(dir / "trace.csv");
      r.trace.write_csv(dir / "inner_trace.csv");
      write_estimate(r.u, dir, "u_star");
      const auto [qi, qs] = quality(r.u);
      put("status", "ok");
      put("alpha0", fmt(a.fixed_alphas[0]));
      put("alpha1", fmt(a.fixed_alphas[1]));
      put("lambda", fmt(r.lambda));
      put("discrepancy", fmt(r.discrepancy));
      put("n_half", fmt(0.5 * static_cast<double>(in.b.size())));
      put("tau_status", to_string(r.tau_status));
      put("inner_iterations", std::to_string(r.iterations));
      put("converged", r.converged ? "true" : "false");
      put("isnr", fmt(qi));
      put("ssim", fmt(qs));
      flush_summary();
      return "restored " + source + " isnr=" + fmt4(qi) + " ssim=" + fmt4(qs) + " lambda=" +
             fmt(r.lambda) + " -> " + dir.string() + "\n";
    }

    put("mode", a.init_only ? "init_only" : "outer");
    std::optional<RunTrace> partial;
    opts.progress = [&](const OuterResult& so_far) { partial = so_far.trace; };
    OuterResult r;
    try {
      r = outer_scheme(in.b, gamma, blur, opts, a.init_only);
    } catch (...) {
      if (partial) {
        stamp(*partial);
        partial->set_metadata("status", "partial");
        partial->write_csv(dir / "trace.csv");
      }
      put("status", "failed");
      flush_summary();
      throw;
    }
    stamp(r.trace);
    stamp(r.inner_trace);
    r.trace.write_csv(dir / "trace.csv");
    r.inner_trace.write_csv(dir / "inner_trace.csv");
    write_estimate(r.u, dir, "u_star");
    if (!a.init_only) write_estimate(r.u_init, dir, "u_init");
    const auto [qi, qs] = quality(r.u);
    const auto [qi0, qs0] = quality(r.u_init);
    put("status", "ok");
    put("alpha0_init", fmt(r.alpha0_init));
    put("alpha1_init", fmt(r.alpha1_init));
    put("alpha0_floored", r.alpha0_floored ? "true" : "false");
    put("alpha1_floored", r.alpha1_floored ? "true" : "false");
    put("lambda_init", fmt(r.lambda_init));
    put("alpha0", fmt(r.alpha0));
    put("alpha1", fmt(r.alpha1));
    put("lambda", fmt(r.lambda));
    put("alpha0_over_lambda", fmt(r.alpha0 / r.lambda));
    put("alpha1_over_lambda", fmt(r.alpha1 / r.lambda));
    put("outer_iterations", std::to_string(r.outer_iterations));
    put("total_inner_iterations", std::to_string(r.total_inner_iterations));
    put("converged", r.converged ? "true" : "false");
    put("isnr_init", fmt(qi0));
    put("ssim_init", fmt(qs0));
    put("isnr", fmt(qi));
    put("ssim", fmt(qs));
    flush_summary();
    if (a.init_only) {
      return "init " + source + " alpha0=" + fmt(r.alpha0_init) + " alpha1=" +
             fmt(r.alpha1_init) + " lambda0=" + fmt(r.lambda_init) + " -> " + dir.string() + "\n";
    }
    return "restored " + source + " isnr=" + fmt4(qi) + " ssim=" + fmt4(qs) + " outer=" +
           std::to_string(r.outer_iterations) + " -> " + dir.string() + "\n";
  });
}

// ---------------------------------------------------------------------------

struct SweepArgs {
  std::string input;
  std::string truth;
  std::vector<double> lambdas;
  std::vector<double> grid;  // lo hi count
  std::vector<double> fixed_alphas;
};

std::vector<double> sweep_grid(const SweepArgs& a) {
  std::vector<double> g = a.lambdas;
  if (!a.grid.empty()) {
    if (a.grid.size() != 3 || a.grid[2] < 1 || a.grid[2] != std::floor(a.grid[2])) {
      throw ConfigError("--grid takes LO HI COUNT");
    }
    try {
      const std::vector<double> lg = log_grid(a.grid[0], a.grid[1], static_cast<int>(a.grid[2]));
      g.insert(g.end(), lg.begin(), lg.end());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (g.empty()) throw ConfigError("sweep-lambda needs --lambdas or --grid");
  for (double l : g) {
    if (!(l > 0.0)) throw ConfigError("lambda values must be positive");
  }
  return g;
}

int cmd_sweep(const Shared& s, const SweepArgs& a) {
  const std::vector<double> grid = sweep_grid(a);
  const DataInput in = load_data(a.input, a.truth);
  const RunConfig c = build_config(s, in.base_config);
  const fs::path dir(s.out);
  make_dir(dir);
  const Image gamma(in.b.dims(), c.degrade.gamma);
  const BccbOperator blur(gaussian_psf(c.degrade.band, c.degrade.sigma), in.b.dims());
  const TgvKlProblem problem(in.b, gamma, blur);
  const double n_half = 0.5 * static_cast<double>(in.b.size());

  RunTrace out({"lambda", "discrepancy", "isnr", "ssim"});
  out.set_metadata("n_half", fmt(n_half));
  out.set_metadata("seed", std::to_string(c.degrade.seed));
  out.set_metadata("config_hash", c.hash());
  double a0 = 0.0;
  double a1 = 0.0;
  if (a.fixed_alphas.size() == 2) {
    a0 = a.fixed_alphas[0];
    a1 = a.fixed_alphas[1];
  } else if (a.fixed_alphas.empty()) {
    const OuterResult r = outer_scheme(in.b, gamma, blur, c.outer);
    a0 = r.alpha0;
    a1 = r.alpha1;
    out.set_metadata("lambda_star", fmt(r.lambda));
  } else {
    throw ConfigError("--fixed-alphas takes two values");
  }
  out.set_metadata("alpha0", fmt(a0));
  out.set_metadata("alpha1", fmt(a1));

  SolveOptions so = c.outer.inner;
  so.record_trace = false;
  so.monitor.reset();
  const std::vector<SweepPoint> rows = discrepancy_sweep(problem, a0, a1, grid, so);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const SweepPoint& p : rows) {
    double qi = nan;
    double qs = nan;
    if (in.truth) {
      qi = isnr(in.b, *in.truth, p.u);
      qs = ssim(*in.truth, p.u, c.effective_dynamic_range());
    }
    out.add_row({p.lambda, p.discrepancy, qi, qs});
  }
  const Crossing cross = find_crossing(rows, n_half);
  out.set_metadata("sign_changes", std::to_string(cross.sign_changes));
  if (cross.lambda) out.set_metadata("crossing", fmt(*cross.lambda));
  out.write_csv(dir / "discrepancy.csv");
  std::printf("swept %zu lambdas -> %s\n", rows.size(), (dir / "discrepancy.csv").string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------

struct MetricsArgs {
  std::string truth;
  std::string estimate;
  std::string b;
  std::optional<double> dynamic_range;
};

int cmd_metrics(const Shared& s, const MetricsArgs& a) {
  const RunConfig c = build_config(s);
  const Image truth = read_image(a.truth);
  const Image est = read_image(a.estimate);
  const Image b = read_image(a.b);
  require_same_dims(truth.dims(), est.dims(), "metrics: estimate");
  require_same_dims(truth.dims(), b.dims(), "metrics: b");
  const double range = a.dynamic_range.value_or(c.effective_dynamic_range());
  std::printf("%s %s\n", fmt4(isnr(b, truth, est)).c_str(), fmt4(ssim(truth, est, range)).c_str());
  return 0;
}

int cmd_phantom(const Shared& s, std::size_t size) {
  if (size < 4) throw ConfigError("phantom size must be >= 4");
  const Image base = make_phantom(225);
  const Image img = size == 225 ? base : resample_area(base, size, size);
  const fs::path dir(s.out);
  make_dir(dir);
  const std::string stem = "phantom_" + std::to_string(size);
  WriteOptions wo;
  wo.maxval = 65535;
  wo.mapping = PixelMapping{0.0, 65535.0, 65535};
  write_image(img, dir / (stem + ".pgm"), ImageFormat::PgmBinary, wo);
  write_csv(img, dir / (stem + ".csv"));
  std::printf("wrote %s\n", (dir / (stem + ".pgm")).string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TGV-KL Poisson deblurring with automatic parameter selection"};
  app.require_subcommand(1);

  Shared shared;
  DegradeArgs dargs;
  RestoreArgs rargs;
  SweepArgs sargs;
  MetricsArgs margs;
  std::size_t phantom_size = 225;

  CLI::App* deg = app.add_subcommand("degrade", "blur, scale and add Poisson noise");
  add_shared(deg, shared);
  deg->add_option("--input", dargs.inputs, "clean image (pgm/png/csv) or phantom:N")->required();
  deg->add_option("--kappa", dargs.kappas, "photon scale(s); overrides config");

  CLI::App* res = app.add_subcommand("restore", "run the automatic TGV-KL restoration");
  add_shared(res, shared);
  res->add_option("--input", rargs.inputs, "b image or degrade output directory")->required();
  res->add_option("--truth", rargs.truth, "ground truth at photon scale (csv)");
  res->add_flag("--init-only", rargs.init_only, "stop after the TV-KL initializer");
  res->add_option("--fixed-alphas", rargs.fixed_alphas, "alpha0 alpha1")->expected(2);
  res->add_option("--fixed-lambda", rargs.fixed_lambda, "hold lambda fixed (with --fixed-alphas)");

  CLI::App* sw = app.add_subcommand("sweep-lambda", "discrepancy of fixed-lambda solves");
  add_shared(sw, shared);
  sw->add_option("--input", sargs.input, "b image or degrade output directory")->required();
  sw->add_option("--truth", sargs.truth, "ground truth at photon scale (csv)");
  sw->add_option("--lambdas", sargs.lambdas, "lambda values")->delimiter(',');
  sw->add_option("--grid", sargs.grid, "LO HI COUNT, log-spaced")->expected(3);
  sw->add_option("--fixed-alphas", sargs.fixed_alphas, "alpha0 alpha1")->expected(2);

  CLI::App* met = app.add_subcommand("metrics", "print ISNR and SSIM");
  add_shared(met, shared);
  met->add_option("--truth", margs.truth)->required();
  met->add_option("--estimate", margs.estimate)->required();
  met->add_option("--b", margs.b)->required();
  met->add_option("--dynamic-range", margs.dynamic_range, "SSIM dynamic range (default kappa)");

  CLI::App* ph = app.add_subcommand("phantom", "write the built-in test phantom");
  add_shared(ph, shared);
  ph->add_option("--size", phantom_size)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (deg->parsed()) return cmd_degrade(shared, dargs);
    if (res->parsed()) return cmd_restore(shared, rargs);
    if (sw->parsed()) return cmd_sweep(shared, sargs);
    if (met->parsed()) return cmd_metrics(shared, margs);
    if (ph->parsed()) return cmd_phantom(shared, phantom_size);
  } catch (...) {
    std::string msg;
    const int code = exit_code_of(std::current_exception(), msg);
    std::fprintf(stderr, "%s\n", msg.c_str());
    return code;
  }
  return 0;
}
