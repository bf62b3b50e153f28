#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "exk/cli.hpp"
#include "exk/errors.hpp"
#include "exk/field.hpp"
#include "exk/gauss.hpp"
#include "exk/validate.hpp"

using namespace exk;
using doctest::Approx;
using std::numbers::pi;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "excursion-kit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string write_config(const std::string& name, const std::string& body) {
  const auto dir = std::filesystem::temp_directory_path() / "exk_cli_tests";
  std::filesystem::create_directories(dir);
  const auto path = dir / name;
  std::ofstream(path) << body;
  return path.string();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> v;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) v.push_back(l);
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      cells.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  cells.push_back(cur);
  return cells;
}

std::string cosine_config(double b0, double b1) {
  std::ostringstream s;
  s.precision(17);
  s << R"({"field": {"type": "cosine"}, "domain": {"lower": [0, 0], "upper": [)" << b0 << ", " << b1 << "]}}";
  return s.str();
}

/// Cosine field whose Hessian supplier is off by a constant.
class CorruptedHessian : public CosineField {
 public:
  Matrix hess_variance(const Vector& t) const override { return CosineField::hess_variance(t) + 0.01 * Matrix::Ones(2, 2); }
};

}  // namespace

TEST_CASE("number formatting and quoting") {
  CHECK(format_number(0.1) == "0.10000000000000001");
  CHECK(std::stod(format_number(pi)) == pi);
  CHECK(csv_quote("1|{1}|{2:1}") == "\"1|{1}|{2:1}\"");
  CHECK(csv_quote("a\"b") == "\"a\"\"b\"");
}

TEST_CASE("level grids") {
  CHECK(parse_levels("5:9:1") == std::vector<double>{5, 6, 7, 8, 9});
  CHECK(parse_levels("0:1:0.25").size() == 5);
  CHECK_THROWS_AS(parse_levels("5:4:1"), ConfigError);
  CHECK_THROWS_AS(parse_levels("1:2"), ConfigError);
  CHECK_THROWS_AS(parse_levels("a:2:1"), ConfigError);
}

TEST_CASE("faces command") {
  const auto two = run({"faces", "--config", write_config("f2.json", cosine_config(pi, pi))});
  CHECK(two.code == kExitOk);
  CHECK(lines(two.out).size() == 9);
  const auto three = run({"faces", "--config", write_config("f3.json", R"({"domain": {"lower": [0,0,0], "upper": [1,1,1]}})")});
  CHECK(lines(three.out).size() == 27);
  const auto bad = run({"faces", "--config", write_config("fbad.json", R"({"domain": {"lower": [0,2], "upper": [1,1]}})")});
  CHECK(bad.code == kExitConfig);
  CHECK(bad.err.find("axis 2") != std::string::npos);
}

TEST_CASE("compute command") {
  const auto cfg = write_config("c.json", cosine_config(pi, pi));
  const auto r = run({"compute", "--config", cfg, "--method", "mu_approx", "--levels", "5:9:1"});
  REQUIRE(r.code == kExitOk);
  const auto rows = lines(r.out);
  REQUIRE(rows.size() == 6);
  const auto header = split_csv(rows[0]);
  CHECK(header.front() == "level");
  CHECK(header[1] == "method");
  CHECK(header[2] == "total");
  CHECK(header.back() == "err_est");
  CHECK(header.size() == 3 + 9 + 1);
  CHECK(header[3] == "2|{1,2}|{}");
  double prev = 1.0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto cells = split_csv(rows[i]);
    REQUIRE(cells.size() == header.size());
    const double total = std::stod(cells[2]);
    CHECK(total < prev);
    prev = total;
    double sum = 0.0;
    for (std::size_t c = 3; c + 1 < cells.size(); ++c) sum += std::stod(cells[c]);
    CHECK(sum == Approx(total).epsilon(1e-12));
  }

  const auto lap = run({"compute", "--config", write_config("l.json", cosine_config(1.5 * pi, 1.5 * pi)), "--method",
                        "laplace", "--levels", "8:8:1"});
  REQUIRE(lap.code == kExitOk);
  CHECK(std::stod(split_csv(lines(lap.out)[1])[2]) == Approx(2 * gauss_tail(8 / std::sqrt(5.0))).epsilon(1e-6));

  const auto one = run({"compute", "--config", cfg, "--levels", "4:6:1", "--threads", "1"});
  const auto many = run({"compute", "--config", cfg, "--levels", "4:6:1", "--threads", "4"});
  CHECK(one.code == kExitOk);
  CHECK(one.out == many.out);

  CHECK(run({"compute", "--config", cfg, "--levels", "5:9:1", "--method", "bogus"}).code == kExitConfig);
  CHECK(run({"compute", "--config", cfg}).code == kExitConfig);
  CHECK(run({"compute"}).code == kExitConfig);
  CHECK(run({"compute", "--config", "/nonexistent/cfg.json", "--levels", "1:2:1"}).code == kExitConfig);
  CHECK(run({"frobnicate"}).code == kExitConfig);

  const auto big = write_config(
      "g4.json", R"({"field": {"type": "gaussian_increment", "dim": 4, "scale": 1}, "domain": {"lower": [0.5,0.5,0.5,0.5], "upper": [1,1,1,1]}})");
  CHECK(run({"compute", "--config", big, "--levels", "3:3:1", "--method", "mean_ec"}).code == kExitCapability);
}

TEST_CASE("mc command") {
  const auto cfg = write_config("m.json", cosine_config(pi, pi));
  const std::vector<std::string> args{"mc", "--config", cfg, "--levels", "2:4:1", "--grid", "16", "--reps", "100", "--seed", "3"};
  auto with_threads = [&](const char* n) {
    auto a = args;
    a.push_back("--threads");
    a.push_back(n);
    return run(a);
  };
  const auto a = with_threads("1"), b = with_threads("1"), c = with_threads("3");
  REQUIRE(a.code == kExitOk);
  CHECK(a.out == b.out);
  CHECK(a.out == c.out);
  const auto rows = lines(a.out);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] == "level,p_hat,stderr,mean_chi,chi_stderr,grid,reps,p_hat_fine,stderr_fine,grid_fine,bias_flag");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto cells = split_csv(rows[i]);
    const double p = std::stod(cells[1]);
    CHECK(std::stod(cells[2]) == Approx(std::sqrt(p * (1 - p) / 100)).epsilon(1e-14));
    CHECK(cells[5] == "16");
    CHECK(cells[6] == "100");
    CHECK(cells[9] == "31");
  }
  const auto gi = write_config(
      "mg.json", R"({"field": {"type": "gaussian_increment", "dim": 2, "scale": 1}, "domain": {"lower": [0,0], "upper": [1,1]}})");
  CHECK(run({"mc", "--config", gi, "--levels", "1:1:1", "--reps", "100", "--grid", "8"}).code == kExitCapability);
  CHECK(run({"mc", "--config", cfg, "--levels", "1:1:1", "--reps", "50", "--grid", "8"}).code == kExitConfig);

  const auto prefix = (std::filesystem::temp_directory_path() / "exk_cli_tests" / "export").string();
  CHECK(run({"mc", "--config", cfg, "--levels", "1:1:1", "--reps", "100", "--grid", "8", "--export", prefix}).code == kExitOk);
  CHECK(std::filesystem::file_size(prefix + ".bin") == 64 * 8);
  CHECK(std::filesystem::exists(prefix + ".json"));
}

TEST_CASE("validate command") {
  const auto ok = run({"validate"});
  CHECK(ok.code == kExitOk);
  CHECK(ok.out.find("validation passed") != std::string::npos);

  const auto zero = write_config("z.json", R"({"field": {"type": "spectral_sum", "atoms": [{"freq": [0, 0], "weight": 1}, {"freq": [1, 0], "weight": 1}], "offset_var": 1},
      "domain": {"lower": [0.5, 0.5], "upper": [2, 2]}})");
  const auto z = run({"validate", "--config", zero});
  CHECK(z.code == kExitValidation);
  CHECK(z.out.find("FAIL  h2") != std::string::npos);

  CorruptedHessian broken;
  const RectDomain sq(Vector::Zero(2), Vector::Constant(2, pi));
  const auto report = run_validation(broken, sq);
  CHECK_FALSE(report.passed());
  bool hess_failed = false;
  for (const auto& c : report.checks)
    if (c.suite == "derivatives" && c.name.find("Hess") != std::string::npos) hess_failed = !c.passed;
  CHECK(hess_failed);
}
