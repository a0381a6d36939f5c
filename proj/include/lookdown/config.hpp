#pragma once

#include "additive.hpp"
#include "branching.hpp"
#include "engine.hpp"
#include "measures.hpp"

#include <json.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace lookdown {

using json = nlohmann::json;

// Collects every violation before failing, each tagged with its key path.
struct Issues {
  std::vector<std::string> list;
  void add(const std::string& path, const std::string& msg) { list.push_back(path + ": " + msg); }
  void raise_if_any() const {
    if (list.empty()) return;
    std::string s = "invalid configuration";
    for (const auto& l : list) s += "\n  " + l;
    throw ConfigError(s);
  }
};

// Read-once view of a JSON object; unread keys are reported by finish().
class Obj {
 public:
  Obj(const json& j, std::string path, Issues& issues) : j_(j), path_(std::move(path)), issues_(&issues) {
    if (!j_.is_object()) issues_->add(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string key_path(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
  bool has(const std::string& k) const { return j_.is_object() && j_.contains(k); }
  Issues& issues() const { return *issues_; }

  double number(const std::string& k, std::optional<double> def = std::nullopt) {
    const json* v = take(k, def.has_value());
    if (!v) return def.value_or(0.0);
    if (!v->is_number()) {
      issues_->add(key_path(k), "expected a number");
      return def.value_or(0.0);
    }
    return v->get<double>();
  }

  long integer(const std::string& k, std::optional<long> def = std::nullopt) {
    const json* v = take(k, def.has_value());
    if (!v) return def.value_or(0);
    if (!v->is_number_integer()) {
      issues_->add(key_path(k), "expected an integer");
      return def.value_or(0);
    }
    return v->get<long>();
  }

  std::uint64_t seed(const std::string& k) {
    const json* v = take(k, false);
    if (!v) return 0;
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0)) {
      issues_->add(key_path(k), "expected a nonnegative integer");
      return 0;
    }
    return v->get<std::uint64_t>();
  }

  bool boolean(const std::string& k, bool def) {
    const json* v = take(k, true);
    if (!v) return def;
    if (!v->is_boolean()) {
      issues_->add(key_path(k), "expected true or false");
      return def;
    }
    return v->get<bool>();
  }

  std::string string(const std::string& k, std::optional<std::string> def = std::nullopt) {
    const json* v = take(k, def.has_value());
    if (!v) return def.value_or("");
    if (!v->is_string()) {
      issues_->add(key_path(k), "expected a string");
      return def.value_or("");
    }
    return v->get<std::string>();
  }

  std::vector<double> numbers(const std::string& k, std::optional<std::vector<double>> def = std::nullopt) {
    const json* v = take(k, def.has_value());
    if (!v) return def.value_or(std::vector<double>{});
    std::vector<double> out;
    if (!v->is_array()) {
      issues_->add(key_path(k), "expected an array of numbers");
      return def.value_or(out);
    }
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_number()) {
        issues_->add(key_path(k) + "[" + std::to_string(i) + "]", "expected a number");
        continue;
      }
      out.push_back((*v)[i].get<double>());
    }
    return out;
  }

  // Array of [a, b] pairs.
  std::vector<Atom> pairs(const std::string& k, std::optional<std::vector<Atom>> def = std::nullopt) {
    const json* v = take(k, def.has_value());
    if (!v) return def.value_or(std::vector<Atom>{});
    std::vector<Atom> out;
    if (!v->is_array()) {
      issues_->add(key_path(k), "expected an array of [location, weight] pairs");
      return out;
    }
    for (std::size_t i = 0; i < v->size(); ++i) {
      const json& e = (*v)[i];
      if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) {
        issues_->add(key_path(k) + "[" + std::to_string(i) + "]", "expected [location, weight]");
        continue;
      }
      out.push_back({e[0].get<double>(), e[1].get<double>()});
    }
    return out;
  }

  std::vector<std::vector<double>> matrix(const std::string& k) {
    const json* v = take(k, false);
    std::vector<std::vector<double>> out;
    if (!v) return out;
    if (!v->is_array()) {
      issues_->add(key_path(k), "expected an array of rows");
      return out;
    }
    for (std::size_t i = 0; i < v->size(); ++i) {
      const json& row = (*v)[i];
      std::vector<double> r;
      if (!row.is_array()) {
        issues_->add(key_path(k) + "[" + std::to_string(i) + "]", "expected a row of numbers");
        continue;
      }
      for (const auto& x : row) {
        if (!x.is_number()) {
          issues_->add(key_path(k) + "[" + std::to_string(i) + "]", "expected numbers");
          break;
        }
        r.push_back(x.get<double>());
      }
      out.push_back(std::move(r));
    }
    return out;
  }

  std::optional<Obj> object(const std::string& k, bool required = false) {
    const json* v = take(k, !required);
    if (!v) return std::nullopt;
    return Obj(*v, key_path(k), *issues_);
  }

  // Array of objects; nullopt when the key is absent.
  std::optional<std::vector<Obj>> objects(const std::string& k) {
    const json* v = take(k, true);
    if (!v) return std::nullopt;
    std::vector<Obj> out;
    if (!v->is_array()) {
      issues_->add(key_path(k), "expected an array of objects");
      return out;
    }
    for (std::size_t i = 0; i < v->size(); ++i) out.emplace_back((*v)[i], key_path(k) + "[" + std::to_string(i) + "]", *issues_);
    return out;
  }

  void finish() {
    if (!j_.is_object()) return;
    for (const auto& [k, _] : j_.items())
      if (!seen_.count(k)) issues_->add(key_path(k), "unknown key");
  }

  void require(bool ok, const std::string& k, const std::string& msg) {
    if (!ok) issues_->add(key_path(k), msg);
  }

 private:
  const json* take(const std::string& k, bool optional) {
    seen_.insert(k);
    if (!has(k)) {
      if (!optional) issues_->add(key_path(k), "missing required key");
      return nullptr;
    }
    return &j_.at(k);
  }

  const json& j_;
  std::string path_;
  Issues* issues_;
  std::set<std::string> seen_;
};

// Runs a domain validator and records its message at the given path.
template <class F>
void checked(Issues& is, const std::string& path, F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    is.add(path, e.what());
  } catch (const DomainError& e) {
    is.add(path, e.what());
  }
}

inline LambdaSpec parse_lambda(Obj o) {
  LambdaSpec s;
  s.c = o.number("c", 0.0);
  if (auto nu = o.object("nu")) {
    const std::string kind = nu->string("kind", "none");
    if (kind == "none") {
      s.nu = NuSpec::none();
    } else if (kind == "beta") {
      const double a = nu->number("alpha");
      checked(o.issues(), nu->key_path("alpha"), [&] { s.nu = NuSpec::beta(a); });
    } else if (kind == "atoms") {
      const auto atoms = nu->pairs("atoms");
      checked(o.issues(), nu->key_path("atoms"), [&] { s.nu = NuSpec::from_atoms(atoms); });
    } else {
      o.issues().add(nu->key_path("kind"), "expected one of none, beta, atoms");
    }
    nu->finish();
  }
  checked(o.issues(), o.key_path("c"), [&] {
    if (!(s.c >= 0.0)) throw ConfigError("Kingman mass c must be nonnegative");
  });
  if (s.degenerate()) o.issues().add(o.key_path("c"), "reproduction intensity is identically zero");
  o.finish();
  return s;
}

inline BranchingMechanism parse_branching(Obj o) {
  BranchingMechanism b;
  b.sigma2 = o.number("sigma2", 0.0);
  b.beta = o.number("beta", 0.0);
  b.nuY = o.pairs("nuY", std::vector<Atom>{});
  checked(o.issues(), o.key_path("nuY"), [&] { b.validate(); });
  o.finish();
  return b;
}

inline InitialLaw parse_initial(Obj o) {
  const std::string kind = o.string("kind", "deterministic");
  const auto p = o.numbers("p");
  InitialLaw l;
  checked(o.issues(), o.key_path("p"), [&] {
    if (kind == "deterministic")
      l = InitialLaw::deterministic(p);
    else if (kind == "dirichlet")
      l = InitialLaw::dirichlet(p);
    else
      throw ConfigError("expected kind deterministic or dirichlet");
  });
  o.finish();
  return l;
}

inline MutationModel parse_mutation(Obj o) {
  const std::string kind = o.string("kind", "none");
  MutationModel m = NoMutation{};
  if (kind == "chain") {
    const FiniteChain fc{o.matrix("Q")};
    m = fc;
  } else if (kind == "brownian") {
    m = BrownianMotion{o.number("diffusion", 1.0)};
  } else if (kind != "none") {
    o.issues().add(o.key_path("kind"), "expected one of none, chain, brownian");
  }
  checked(o.issues(), o.key_path("kind"), [&] { validate_mutation(m); });
  o.finish();
  return m;
}

inline HarmonicPair parse_harmonic(Obj o, const MutationModel& m) {
  const std::string kind = o.string("kind", "constant");
  HarmonicPair h;
  if (kind == "constant") {
    o.finish();
    return h;
  }
  const auto* fc = std::get_if<FiniteChain>(&m);
  if (kind == "eigen") {
    const auto v = o.numbers("h");
    const double theta = o.number("theta", 0.0);
    checked(o.issues(), o.key_path("h"), [&] {
      if (!fc) throw ConfigError("eigen h needs a chain mutation");
      h = HarmonicPair::eigen(*fc, v, theta);
    });
  } else if (kind == "terminal") {
    const auto g = o.numbers("g");
    const double T = o.number("horizon");
    checked(o.issues(), o.key_path("g"), [&] {
      if (!fc) throw ConfigError("terminal-value h needs a chain mutation");
      h = HarmonicPair::terminal_value(*fc, g, T);
    });
  } else if (kind == "exponential") {
    const double theta = o.number("theta");
    checked(o.issues(), o.key_path("theta"), [&] {
      const auto* bm = std::get_if<BrownianMotion>(&m);
      if (!bm) throw ConfigError("exponential h needs Brownian mutation");
      h = HarmonicPair::exponential(*bm, theta);
    });
  } else {
    o.issues().add(o.key_path("kind"), "expected one of constant, eigen, terminal, exponential");
  }
  o.finish();
  return h;
}

// 64-bit FNV-1a, printed as 16 hex digits.
inline std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  static const char* d = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[i] = d[h & 15];
  return out;
}

// Hash of the effective configuration, excluding keys that do not change results.
inline std::string config_hash(json cfg) {
  cfg.erase("workers");
  cfg.erase("out");
  return fnv1a_hex(cfg.dump());
}

}  // namespace lookdown
