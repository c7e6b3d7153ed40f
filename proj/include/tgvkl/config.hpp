#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tgvkl/admm.hpp"
#include "tgvkl/hyper.hpp"
#include "tgvkl/image_io.hpp"
#include "tgvkl/noise.hpp"
#include "tgvkl/trace.hpp"

namespace tgvkl {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat experiment configuration. Defaults follow the reference protocol.
struct RunConfig {
  DegradeConfig degrade;
  OuterOptions outer;
  double tau_tol_abs = 0.0;  // 0: 1e-6 * n
  double dynamic_range = 0.0;  // 0: kappa
  int ssim_every = 0;
  int jobs = 1;

  struct Field {
    std::string key;
    std::function<void(std::string_view)> set;
    std::function<std::string()> get;
  };

  std::vector<Field> fields() {
    std::vector<Field> f;
    add(f, "kappa", degrade.kappa);
    add(f, "gamma", degrade.gamma);
    add(f, "band", degrade.band);
    add(f, "sigma", degrade.sigma);
    add(f, "seed", degrade.seed);
    add(f, "rho", outer.inner.rho);
    add(f, "tol_rel", outer.inner.tol_rel);
    add(f, "max_inner", outer.inner.max_inner);
    add(f, "tau_tol_abs", tau_tol_abs);
    add(f, "max_newton", outer.inner.tau.max_newton);
    add(f, "max_bisection", outer.inner.tau.max_bisection);
    add(f, "tau_min", outer.inner.tau.tau_min);
    add(f, "tau_init", outer.inner.tau.tau_init);
    add(f, "max_outer", outer.max_outer);
    add(f, "tol_rel_outer", outer.tol_rel_outer);
    add(f, "hyper_std", outer.hyper_std);
    add(f, "alpha1_on_symgrad", outer.alpha1_on_symgrad);
    add(f, "full_warm_start", outer.full_warm_start);
    add(f, "dynamic_range", dynamic_range);
    add(f, "ssim_every", ssim_every);
    add(f, "jobs", jobs);
    return f;
  }

  void set(std::string_view key, std::string_view value) {
    for (auto& f : fields()) {
      if (f.key == key) {
        f.set(value);
        return;
      }
    }
    throw ConfigError("unknown config key '" + std::string(key) + "'");
  }

  void load_text(std::string_view text, const std::string& origin = "config") {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      std::size_t eol = text.find('\n', pos);
      if (eol == std::string_view::npos) eol = text.size();
      std::string_view line = text.substr(pos, eol - pos);
      pos = eol + 1;
      ++line_no;
      if (const auto hash = line.find('#'); hash != std::string_view::npos) {
        line = line.substr(0, hash);
      }
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key=value");
      }
      try {
        set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
      } catch (const ConfigError& e) {
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
  }

  void load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    load_text(ss.str(), path.string());
  }

  /// Canonical "key=value" listing of every field.
  [[nodiscard]] std::string to_text() const {
    std::string out;
    for (auto& f : const_cast<RunConfig*>(this)->fields()) out += f.key + "=" + f.get() + "\n";
    return out;
  }

  [[nodiscard]] std::string hash() const { return hex64(fnv1a64(to_text())); }

  /// Copies derived settings into the solver options and validates them.
  void finalize() {
    if (tau_tol_abs < 0.0) throw ConfigError("tau_tol_abs must be >= 0");
    if (tau_tol_abs > 0.0) {
      outer.inner.tau.tol_abs = tau_tol_abs;
    } else {
      outer.inner.tau.tol_abs.reset();
    }
    if (outer.inner.max_inner < 1) throw ConfigError("max_inner must be >= 1");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    if (dynamic_range < 0.0) throw ConfigError("dynamic_range must be >= 0");
    try {
      degrade.validate();
      outer.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }

  [[nodiscard]] double effective_dynamic_range() const {
    return dynamic_range > 0.0 ? dynamic_range : degrade.kappa;
  }

 private:
  static std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
      s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
      s.remove_suffix(1);
    }
    return s;
  }

  template <class T>
  static T parse(std::string_view key, std::string_view v) {
    if constexpr (std::is_same_v<T, bool>) {
      if (v == "true" || v == "1") return true;
      if (v == "false" || v == "0") return false;
      throw ConfigError("bad boolean for " + std::string(key) + ": '" + std::string(v) + "'");
    } else {
      T out{};
      const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
      if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
        throw ConfigError("bad value for " + std::string(key) + ": '" + std::string(v) + "'");
      }
      return out;
    }
  }

  template <class T>
  static std::string show(const T& v) {
    if constexpr (std::is_same_v<T, bool>) {
      return v ? "true" : "false";
    } else if constexpr (std::is_floating_point_v<T>) {
      return format_double(v);
    } else {
      return std::to_string(v);
    }
  }

  template <class T>
  static void add(std::vector<Field>& f, const char* key, T& ref) {
    std::string k = key;
    f.push_back({k, [k, &ref](std::string_view v) { ref = parse<T>(k, v); },
                 [&ref] { return show(ref); }});
  }
};

}  // namespace tgvkl
