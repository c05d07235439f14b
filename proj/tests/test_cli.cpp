#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "metashift/config.hpp"

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CliResult run_cli(const std::string& args, const fs::path& scratch) {
  const fs::path out_file = scratch / "stdout.txt";
  const fs::path err_file = scratch / "stderr.txt";
  const std::string cmd = std::string(METASHIFT_CLI_PATH) + " " + args + " > " +
                          out_file.string() + " 2> " + err_file.string();
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out_file);
  r.err = slurp(err_file);
  return r;
}

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("metashift_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_config(const fs::path& path, const std::string& body) {
  std::ofstream out(path);
  out << body;
}

}  // namespace

TEST_CASE("train with zero iterations exits cleanly and writes the initial checkpoint") {
  const fs::path dir = fresh_dir("train0");
  write_config(dir / "config.json",
               R"({"learner_kind":"maml","mode":"fisl","iterations":0,)"
               R"("encoder":{"hidden_dims":[6,6]},"out_dir":")" + (dir / "run").string() + R"("})");
  CliResult r = run_cli("train --config " + (dir / "config.json").string(), dir);
  CHECK(r.exit_code == 0);
  CHECK(fs::exists(dir / "run" / "checkpoint.json"));
  CHECK(slurp(dir / "run" / "metrics.csv") ==
        "iteration,train_loss,val_mse_source,val_mse_unseen\n");
  fs::remove_all(dir);
}

TEST_CASE("eval on an identity-shift checkpoint matches with and without the shift") {
  const fs::path dir = fresh_dir("evalid");
  write_config(dir / "config.json",
               R"({"learner_kind":"maml","mode":"fisl","iterations":0,"n_eval_tasks":16,)"
               R"("n_val_tasks":2,"encoder":{"hidden_dims":[6,6]},"out_dir":")" +
                   (dir / "run").string() + R"("})");
  CHECK(run_cli("train --config " + (dir / "config.json").string(), dir).exit_code == 0);
  const std::string ckpt = (dir / "run" / "checkpoint.json").string();
  CHECK(run_cli("eval --checkpoint " + ckpt + " --domain unseen", dir).exit_code == 0);
  CHECK(run_cli("eval --checkpoint " + ckpt + " --domain unseen --no-fisl", dir).exit_code == 0);
  const std::string with_fisl = slurp(dir / "run" / "results-unseen.csv");
  const std::string without = slurp(dir / "run" / "results-unseen-nofisl.csv");
  // Same numbers; only the tag differs.
  auto second_line = [](const std::string& csv) {
    const auto nl = csv.find('\n');
    return csv.substr(nl + 1);
  };
  std::string a = second_line(with_fisl), b = second_line(without);
  b.erase(b.find("-nofisl"), 7);
  CHECK(a == b);
  fs::remove_all(dir);
}

TEST_CASE("curve dumps and per-task dumps are written on request") {
  const fs::path dir = fresh_dir("curves");
  write_config(dir / "config.json",
               R"({"learner_kind":"maml","mode":"fisl","iterations":2,"eval_cadence":2,)"
               R"("n_eval_tasks":4,"n_val_tasks":2,"encoder":{"hidden_dims":[6,6]},"out_dir":")" +
                   (dir / "run").string() + R"("})");
  CHECK(run_cli("train --config " + (dir / "config.json").string(), dir).exit_code == 0);
  const std::string ckpt = (dir / "run" / "checkpoint.json").string();
  CliResult r = run_cli("eval --checkpoint " + ckpt +
                            " --domain unseen --dump-per-task --dump-curves 2",
                        dir);
  CHECK(r.exit_code == 0);
  CHECK(fs::exists(dir / "run" / "per-task-unseen.csv"));
  const std::string curves = slurp(dir / "run" / "curves-unseen.csv");
  CHECK(curves.rfind("task,x,y_true,y_pred", 0) == 0);
  // 2 tasks x 200 grid points + header
  CHECK(std::count(curves.begin(), curves.end(), '\n') == 401);
  fs::remove_all(dir);
}

TEST_CASE("failures exit nonzero with a machine-readable error") {
  const fs::path dir = fresh_dir("badcfg");
  write_config(dir / "config.json", R"({"learner_kind":"maml","bogus_key":1})");
  CliResult r = run_cli("train --config " + (dir / "config.json").string(), dir);
  CHECK(r.exit_code != 0);
  nlohmann::json err = nlohmann::json::parse(r.err);
  CHECK(err.contains("error"));
  const std::string msg = err["error"].get<std::string>();
  CHECK(msg.find("bogus_key") != std::string::npos);

  CliResult missing = run_cli("eval --checkpoint /nope.json --domain unseen", dir);
  CHECK(missing.exit_code != 0);
  CHECK(nlohmann::json::parse(missing.err).contains("error"));
  fs::remove_all(dir);
}
