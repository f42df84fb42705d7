// iprep: run, validate and list the named experiments.

#include <openssl/sha.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "iprep/experiments.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitAssertion = 1;
constexpr int kExitSchema = 2;
constexpr int kExitResource = 3;

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw iprep::ConfigError("cannot read config " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

iprep::ExperimentConfig load(const std::string& path, std::string* text = nullptr) {
  const std::string body = read_file(path);
  iprep::json doc;
  try {
    doc = iprep::json::parse(body);
  } catch (const iprep::json::parse_error& e) {
    throw iprep::ConfigError(std::string("malformed JSON: ") + e.what());
  }
  if (text) *text = body;
  return iprep::parse_config(doc);
}

/// Object id git would give the config as a blob.
std::string blob_hash(const std::string& body) {
  const std::string obj = "blob " + std::to_string(body.size()) + '\0' + body;
  unsigned char md[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(obj.data()), obj.size(), md);
  std::string hex;
  char buf[3];
  for (unsigned char c : md) {
    std::snprintf(buf, sizeof buf, "%02x", c);
    hex += buf;
  }
  return hex;
}

void print_list() {
  for (const auto& e : iprep::experiment_catalog()) {
    std::cout << e.name << "  " << e.summary << (e.randomized ? "  [seed required]" : "") << '\n';
    for (const auto& f : e.params)
      std::cout << "    " << (f.required ? "* " : "  ") << f.name << " (" << f.type << "): " << f.help << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adiabatic eigenstate preparation toolkit"};
  app.require_subcommand(1);

  std::string config, out;
  unsigned threads = 1;
  auto* run = app.add_subcommand("run", "run an experiment");
  run->add_option("--config", config, "experiment config (JSON)")->required();
  run->add_option("--out", out, "output directory, overrides output_dir");
  run->add_option("--threads", threads, "worker thread cap")->check(CLI::PositiveNumber);

  auto* validate = app.add_subcommand("validate", "check a config against the schema");
  validate->add_option("--config", config, "experiment config (JSON)")->required();

  app.add_subcommand("list", "print experiments and their parameters");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitSchema;
  }

  try {
    if (app.got_subcommand("list")) {
      print_list();
      return kExitOk;
    }
    if (app.got_subcommand("validate")) {
      const auto cfg = load(config);
      std::cout << "ok: " << cfg.experiment << '\n';
      return kExitOk;
    }
    std::string body;
    const auto cfg = load(config, &body);
    const std::string dir = out.empty() ? cfg.output_dir : out;
    const auto rep = iprep::run_experiment(cfg, dir, threads, blob_hash(body));
    for (const auto& a : rep.assertions)
      std::cout << (a.passed ? "PASS " : "FAIL ") << a.name << (a.detail.empty() ? "" : ": " + a.detail) << '\n';
    std::cout << "wrote " << rep.manifest.size() << " files to " << dir << '\n';
    return rep.passed() ? kExitOk : kExitAssertion;
  } catch (const iprep::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitSchema;
  } catch (const std::length_error& e) {
    std::cerr << "resource limit: " << e.what() << '\n';
    return kExitResource;
  } catch (const std::bad_alloc&) {
    std::cerr << "resource limit: out of memory\n";
    return kExitResource;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitAssertion;
  }
}
