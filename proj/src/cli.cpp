#include "exk/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numbers>
#include <sstream>

#include "exk/errors.hpp"
#include "exk/field_io.hpp"
#include "exk/mc.hpp"
#include "exk/mec.hpp"
#include "exk/parallel.hpp"
#include "exk/validate.hpp"

namespace exk {

using nlohmann::json;

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_quote(const std::string& field) {
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::vector<double> parse_levels(const std::string& spec) {
  std::vector<double> parts;
  std::stringstream in(spec);
  std::string item;
  while (std::getline(in, item, ':')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("levels: cannot parse '" + item + "' in '" + spec + "'");
    }
  }
  if (parts.size() != 3) throw ConfigError("levels: expected A:B:S, got '" + spec + "'");
  const double start = parts[0], stop = parts[1], step = parts[2];
  if (!(step > 0.0) || !(stop >= start)) throw ConfigError("levels: need S > 0 and B >= A in '" + spec + "'");
  const auto count = static_cast<long long>(std::floor((stop - start) / step + 1e-9)) + 1;
  if (count > 100000) throw ConfigError("levels: too many levels in '" + spec + "'");
  std::vector<double> levels;
  for (long long i = 0; i < count; ++i) levels.push_back(start + static_cast<double>(i) * step);
  return levels;
}

namespace {

std::vector<double> number_list(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw ConfigError(what + " must be a non-empty array of numbers");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw ConfigError(what + " must contain numbers only");
    out.push_back(v.get<double>());
  }
  return out;
}

void check_levels(const std::vector<double>& levels) {
  if (levels.empty()) throw ConfigError("levels must not be empty");
  for (std::size_t i = 1; i < levels.size(); ++i)
    if (!(levels[i] > levels[i - 1])) throw ConfigError("levels must be strictly increasing");
}

}  // namespace

RunConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  RunConfig cfg;
  if (doc.contains("field")) cfg.field = doc["field"];
  if (doc.contains("domain")) {
    const auto& d = doc["domain"];
    if (!d.is_object() || !d.contains("lower") || !d.contains("upper")) {
      throw ConfigError("config: domain needs 'lower' and 'upper'");
    }
    const auto lo = number_list(d["lower"], "domain.lower");
    const auto hi = number_list(d["upper"], "domain.upper");
    if (lo.size() != hi.size()) throw ConfigError("config: domain.lower and domain.upper differ in length");
    cfg.domain.emplace(Eigen::Map<const Vector>(lo.data(), static_cast<Index>(lo.size())),
                       Eigen::Map<const Vector>(hi.data(), static_cast<Index>(hi.size())));
  }
  if (doc.contains("levels")) {
    const auto& l = doc["levels"];
    if (l.is_array()) {
      cfg.levels = number_list(l, "levels");
    } else if (l.is_object() && l.contains("start") && l.contains("stop") && l.contains("step")) {
      cfg.levels = parse_levels(format_number(l["start"].get<double>()) + ":" + format_number(l["stop"].get<double>()) +
                                ":" + format_number(l["step"].get<double>()));
    } else {
      throw ConfigError("config: levels must be a list or {start, stop, step}");
    }
    check_levels(cfg.levels);
  }
  if (doc.contains("method")) cfg.method = doc["method"].get<std::string>();
  if (doc.contains("quad")) {
    const auto& q = doc["quad"];
    if (q.contains("order")) cfg.quad.order_per_axis = q["order"].get<int>();
    if (q.contains("rel_tol")) cfg.quad.rel_tol = q["rel_tol"].get<double>();
    if (q.contains("max_subdivisions")) cfg.quad.max_subdivisions = q["max_subdivisions"].get<int>();
  }
  if (doc.contains("mc")) {
    const auto& m = doc["mc"];
    if (m.contains("grid")) cfg.grid = m["grid"].get<int>();
    if (m.contains("reps")) cfg.reps = m["reps"].get<long long>();
  }
  if (doc.contains("seed")) cfg.seed = doc["seed"].get<std::uint64_t>();
  if (doc.contains("output")) cfg.output = doc["output"].get<std::string>();
  return cfg;
}

namespace {

struct Invocation {
  std::string command;
  std::string config_path;
  std::optional<std::string> levels, method, out_path, export_prefix;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads, grid, quad_order;
  std::optional<long long> reps;
  std::optional<double> rel_tol;
};

RunConfig resolve(const Invocation& inv) {
  RunConfig cfg;
  if (!inv.config_path.empty()) {
    std::ifstream in(inv.config_path);
    if (!in) throw ConfigError("config: cannot open '" + inv.config_path + "'");
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("config: " + std::string(e.what()));
    }
    cfg = config_from_json(doc);
  }
  if (inv.levels) cfg.levels = parse_levels(*inv.levels);
  if (inv.method) cfg.method = *inv.method;
  if (inv.seed) cfg.seed = *inv.seed;
  cfg.threads = inv.threads ? *inv.threads : default_threads();
  if (cfg.threads < 1) throw ConfigError("--threads must be >= 1");
  if (inv.out_path) cfg.output = *inv.out_path;
  if (inv.grid) cfg.grid = *inv.grid;
  if (inv.reps) cfg.reps = *inv.reps;
  if (inv.quad_order) cfg.quad.order_per_axis = *inv.quad_order;
  if (inv.rel_tol) cfg.quad.rel_tol = *inv.rel_tol;
  if (cfg.quad.order_per_axis < 2) throw ConfigError("quadrature order must be at least 2");
  if (!(cfg.quad.rel_tol > 0.0)) throw ConfigError("rel_tol must be positive");
  return cfg;
}

const RectDomain& need_domain(const RunConfig& cfg) {
  if (!cfg.domain) throw ConfigError("config: 'domain' is required for this command");
  return *cfg.domain;
}

std::unique_ptr<FieldModel> need_model(const RunConfig& cfg) {
  if (cfg.field.is_null()) throw ConfigError("config: 'field' is required for this command");
  auto model = model_from_json(cfg.field);
  if (cfg.domain && model->dim() != cfg.domain->dim()) {
    throw ConfigError("config: field dimension " + std::to_string(model->dim()) + " does not match domain dimension " +
                      std::to_string(cfg.domain->dim()));
  }
  return model;
}

void need_levels(const RunConfig& cfg) {
  if (cfg.levels.empty()) throw ConfigError("no levels given (config 'levels' or --levels)");
}

std::string cone_text(const Face& face) {
  if (face.is_interior()) return "R^0";
  std::string s;
  for (const auto& c : outward_cone(face).constraints) {
    if (!s.empty()) s += ", ";
    s += "y" + std::to_string(c.index + 1) + (c.sign > 0 ? " >= 0" : " <= 0");
  }
  return s;
}

int cmd_faces(const RunConfig& cfg, std::ostream& out) {
  for (const auto& face : enumerate_faces(need_domain(cfg))) {
    std::string sigma, eps;
    for (int j : face.sigma) sigma += (sigma.empty() ? "" : ",") + std::to_string(j + 1);
    for (std::size_t m = 0; m < face.fixed.size(); ++m) {
      eps += (eps.empty() ? "" : ",") + std::to_string(face.fixed[m] + 1) + ":" + std::to_string(face.epsilon[m]);
    }
    out << face.to_string() << "\tsigma={" << sigma << "}\tepsilon={" << eps << "}\tE(J): " << cone_text(face) << "\n";
  }
  return kExitOk;
}

int cmd_mc(const RunConfig& cfg, const std::optional<std::string>& export_prefix, std::ostream& out,
           std::ostream& err) {
  const auto& domain = need_domain(cfg);
  const auto model = need_model(cfg);
  need_levels(cfg);
  McOptions opts;
  opts.points_per_axis = cfg.grid;
  opts.reps = cfg.reps;
  opts.seed = cfg.seed;
  opts.threads = cfg.threads;
  opts.dual_resolution = true;
  opts.compute_ec = domain.dim() <= 3;
  const auto rows = mc_run(*model, domain, cfg.levels, opts);
  out << "level,p_hat,stderr,mean_chi,chi_stderr,grid,reps,p_hat_fine,stderr_fine,grid_fine,bias_flag\n";
  for (const auto& r : rows) {
    out << format_number(r.level) << ',' << format_number(r.p_hat) << ',' << format_number(r.stderr_p) << ','
        << format_number(r.mean_chi) << ',' << format_number(r.chi_stderr) << ',' << cfg.grid << ',' << cfg.reps << ','
        << format_number(r.p_hat_fine) << ',' << format_number(r.stderr_fine) << ',' << 2 * cfg.grid - 1 << ','
        << (r.bias_flag ? 1 : 0) << "\n";
    if (r.bias_flag) {
      err << "warning: level " << r.level << ": grid " << cfg.grid << " and " << 2 * cfg.grid - 1
          << " estimates differ by more than the Monte Carlo error\n";
    }
  }
  if (export_prefix) export_realization(sample_field(*model, GridSpec(domain, cfg.grid), cfg.seed, 0), *export_prefix);
  return kExitOk;
}

int cmd_compute(const RunConfig& cfg, const std::optional<std::string>& export_prefix, std::ostream& out,
                std::ostream& err) {
  if (cfg.method == "mc") return cmd_mc(cfg, export_prefix, out, err);
  const Method method = method_from_string(cfg.method);
  const auto& domain = need_domain(cfg);
  const auto model = need_model(cfg);
  need_levels(cfg);
  MecOptions opts;
  opts.quad = cfg.quad;
  opts.seed = cfg.seed;
  opts.threads = cfg.threads;

  std::optional<LaplaceInputs> laplace;
  if (method == Method::laplace) laplace = laplace_inputs(*model, domain);

  out << "level,method,total";
  for (const auto& face : enumerate_faces(domain)) out << ',' << csv_quote(face.to_string());
  out << ",err_est\n";
  for (double u : cfg.levels) {
    const MecResult r = laplace ? laplace_result(*model, domain, u, *laplace, cfg.seed) : compute(method, *model, domain, u, opts);
    out << format_number(u) << ',' << to_string(r.method) << ',' << format_number(r.total);
    for (const auto& f : r.per_face) out << ',' << format_number(f.value);
    out << ',' << format_number(r.err_est) << "\n";
    for (const auto& w : r.warnings) err << "warning: level " << u << ": " << w << "\n";
  }
  return kExitOk;
}

int cmd_validate(const RunConfig& cfg, std::ostream& out) {
  std::unique_ptr<FieldModel> model;
  if (cfg.field.is_null()) {
    model = model_from_json(json{{"type", "cosine"}});
  } else {
    model = model_from_json(cfg.field);
  }
  const RectDomain domain = cfg.domain ? *cfg.domain
                                       : RectDomain(Vector::Zero(model->dim()),
                                                    Vector::Constant(model->dim(), std::numbers::pi));
  ValidationOptions opts;
  opts.seed = cfg.seed;
  const auto report = run_validation(*model, domain, opts);
  write_report(report, out);
  return report.passed() ? kExitOk : kExitValidation;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Mean Euler characteristic and excursion probabilities of Gaussian fields on rectangles",
               "excursion-kit"};
  Invocation inv;
  app.add_option("command", inv.command, "faces | compute | mc | validate")
      ->required()
      ->check(CLI::IsMember({"faces", "compute", "mc", "validate"}));
  app.add_option("--config", inv.config_path, "JSON run configuration");
  app.add_option("--levels", inv.levels, "level grid A:B:S (inclusive)");
  app.add_option("--method", inv.method, "mu_approx | mean_ec | laplace | mc");
  app.add_option("--seed", inv.seed, "master seed (default 0)");
  app.add_option("--threads", inv.threads, "worker threads (default EXK_THREADS or all cores)");
  app.add_option("--out", inv.out_path, "write output to this file instead of stdout");
  app.add_option("--grid", inv.grid, "Monte Carlo grid points per axis");
  app.add_option("--reps", inv.reps, "Monte Carlo replicates");
  app.add_option("--quad-order", inv.quad_order, "Gauss-Legendre points per axis");
  app.add_option("--rel-tol", inv.rel_tol, "quadrature relative tolerance");
  app.add_option("--export", inv.export_prefix, "mc: write replicate 0 as PREFIX.bin and PREFIX.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitConfig;
  }

  try {
    if (inv.command != "validate" && inv.config_path.empty()) throw ConfigError("--config is required");
    const RunConfig cfg = resolve(inv);
    std::ofstream file;
    std::ostream* sink = &out;
    if (!cfg.output.empty()) {
      file.open(cfg.output);
      if (!file) throw ConfigError("cannot write '" + cfg.output + "'");
      sink = &file;
    }
    if (inv.command == "faces") return cmd_faces(cfg, *sink);
    if (inv.command == "compute") return cmd_compute(cfg, inv.export_prefix, *sink, err);
    if (inv.command == "mc") return cmd_mc(cfg, inv.export_prefix, *sink, err);
    return cmd_validate(cfg, *sink);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const json::exception& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CapabilityError& e) {
    err << "capability error: " << e.what() << "\n";
    return kExitCapability;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DomainError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  }
}

}  // namespace exk
