#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ojasde/distribution.hpp"
#include "ojasde/errors.hpp"
#include "ojasde/report.hpp"

namespace ojasde {

/// One experiment run, fully determined by this struct plus the seed.
struct ExperimentConfig {
  std::string experiment;  // weak_error | unstable_demo | invariant_measure
                           // | langevin | fp_convergence | sga_vs_ode
                           // | identities
  DistributionSpec distribution =
      DistributionSpec::product_uniform({2.0, 1.0});
  std::vector<double> eta = {0.1};
  std::vector<double> dt = {1e-2};
  double t_final = 1.0;
  std::uint64_t n_mc = 1000;
  std::uint64_t seed = 0;
  std::string phi_id = "w11";
  std::size_t n = 2;
  std::size_t p = 2;
  std::size_t grid_m = 512;
  bool retraction = true;
  double theta0 = 1.0;
  double sigma = 0.5;
  std::string potential = "oja_brockett";
  std::vector<double> potential_weights;
  double burn_in = 50.0;
  std::string output;
  std::string format = "csv";
  unsigned workers = 0;

  ModelContext context() const { return exact_moments(distribution); }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["experiment"] = experiment;
    if (distribution.kind == DistributionSpec::Kind::ProductUniform) {
      j["distribution"] = {{"kind", "product_uniform"},
                           {"half_widths", distribution.half_widths}};
    } else {
      j["distribution"] = {{"kind", "finite_atoms"},
                           {"atoms", distribution.atoms},
                           {"weights", distribution.weights}};
    }
    j["eta"] = eta;
    j["dt"] = dt;
    j["T"] = t_final;
    j["n_mc"] = n_mc;
    j["seed"] = seed;
    j["phi"] = phi_id;
    j["n"] = n;
    j["p"] = p;
    j["grid_m"] = grid_m;
    j["retraction"] = retraction;
    j["theta0"] = theta0;
    j["sigma"] = sigma;
    j["potential"] = potential;
    j["potential_weights"] = potential_weights;
    j["burn_in"] = burn_in;
    j["output"] = output;
    j["format"] = format;
    j["workers"] = workers;
    return j;
  }

  std::string hash() const { return fnv1a_hex(to_json().dump()); }
};

inline const std::set<std::string>& known_experiments() {
  static const std::set<std::string> kinds = {
      "weak_error",    "unstable_demo", "invariant_measure", "langevin",
      "fp_convergence", "sga_vs_ode",   "identities"};
  return kinds;
}

/// Parse and validate a config document. Unknown keys are rejected;
/// validation failures name the offending key.
inline ExperimentConfig load_config(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ParseError("config: document must be an object");
  static const std::set<std::string> known_keys = {
      "experiment", "distribution", "eta",   "dt",        "T",
      "n_mc",       "seed",         "phi",   "n",         "p",
      "grid_m",     "retraction",   "theta0", "sigma",    "potential",
      "potential_weights", "burn_in", "output", "format", "workers"};
  for (const auto& [key, value] : doc.items()) {
    (void)value;
    if (known_keys.count(key) == 0)
      throw ValidationError("config: unknown key '" + key + "'");
  }

  ExperimentConfig cfg;
  try {
    cfg.experiment = doc.at("experiment").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError("config: 'experiment' must be a string");
  }
  if (known_experiments().count(cfg.experiment) == 0)
    throw ValidationError("config: unknown experiment '" + cfg.experiment +
                          "'");

  if (doc.contains("distribution")) {
    const auto& d = doc["distribution"];
    std::string kind;
    try {
      kind = d.at("kind").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw ValidationError("config: 'distribution.kind' missing");
    }
    try {
      if (kind == "product_uniform") {
        cfg.distribution = DistributionSpec::product_uniform(
            d.at("half_widths").get<std::vector<double>>());
      } else if (kind == "finite_atoms") {
        cfg.distribution = DistributionSpec::finite_atoms(
            d.at("atoms").get<std::vector<std::vector<double>>>(),
            d.at("weights").get<std::vector<double>>());
      } else {
        throw ValidationError("config: 'distribution.kind' must be "
                              "product_uniform or finite_atoms");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("config: 'distribution': ") + e.what());
    }
  }

  auto get_into = [&doc](const char* key, auto& field) {
    if (!doc.contains(key)) return;
    try {
      field = doc[key].get<std::decay_t<decltype(field)>>();
    } catch (const nlohmann::json::exception&) {
      throw ValidationError(std::string("config: bad value for '") + key + "'");
    }
  };
  get_into("eta", cfg.eta);
  get_into("dt", cfg.dt);
  get_into("T", cfg.t_final);
  get_into("n_mc", cfg.n_mc);
  get_into("seed", cfg.seed);
  get_into("phi", cfg.phi_id);
  get_into("n", cfg.n);
  get_into("p", cfg.p);
  get_into("grid_m", cfg.grid_m);
  get_into("retraction", cfg.retraction);
  get_into("theta0", cfg.theta0);
  get_into("sigma", cfg.sigma);
  get_into("potential", cfg.potential);
  get_into("potential_weights", cfg.potential_weights);
  get_into("burn_in", cfg.burn_in);
  get_into("output", cfg.output);
  get_into("format", cfg.format);
  get_into("workers", cfg.workers);

  for (double e : cfg.eta)
    if (!(e > 0.0)) throw ValidationError("config: 'eta' entries must be > 0");
  for (double d : cfg.dt)
    if (!(d > 0.0)) throw ValidationError("config: 'dt' entries must be > 0");
  if (!(cfg.t_final > 0.0)) throw ValidationError("config: 'T' must be > 0");
  if (cfg.n_mc == 0) throw ValidationError("config: 'n_mc' must be >= 1");
  if (cfg.n < 1 || cfg.n > 4)
    throw ValidationError("config: 'n' must be in 1..4");
  if (cfg.p < 1 || cfg.p > cfg.n)
    throw ValidationError("config: 'p' must be in 1..n");
  if (cfg.grid_m < 4) throw ValidationError("config: 'grid_m' must be >= 4");
  if (cfg.format != "csv" && cfg.format != "json")
    throw ValidationError("config: 'format' must be csv or json");
  if (cfg.distribution.dim != cfg.n)
    throw ValidationError("config: 'distribution' dimension must equal 'n'");
  if (!(cfg.sigma >= 0.0)) throw ValidationError("config: 'sigma' must be >= 0");
  return cfg;
}

inline ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("config: invalid JSON: ") + e.what());
  }
  return load_config(doc);
}

}  // namespace ojasde
