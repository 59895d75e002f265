#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <string>

#include "doctest.h"
#include "qlens/harness/config.hpp"
#include "qlens/harness/csv.hpp"
#include "qlens/io_util.hpp"
#include "qlens/tensor_io.hpp"
#include "test_util.hpp"

using namespace qlens;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run cli(const std::string& args, const fs::path& dir) {
  const fs::path log = dir / "cli.log";
  const std::string cmd = std::string(QLENS_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(log);
  return r;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("tensor subcommands") {
  TempDir dir;
  const std::string w = (dir.path / "w.qtns").string();
  auto gen = cli("gen --dist normal:0,1 --shape 64,32 --seed 3 --out " + w, dir.path);
  REQUIRE_MESSAGE(gen.code == 0, gen.out);
  CHECK(read_tensor(w).shape() == Shape{64, 32});

  auto st = cli("stats --in " + w, dir.path);
  CHECK(st.code == 0);
  CHECK(st.out.find("absmax") != std::string::npos);

  auto q = cli("quantize --in " + w + " --bits 4 --policy absmax --granularity per-channel:0", dir.path);
  CHECK_MESSAGE(q.code == 0, q.out);
  CHECK(fs::exists(dir.path / "w.qtnq"));
  CHECK(q.out.find("l2_delta") != std::string::npos);
  CHECK(q.out.find("clip_fraction") != std::string::npos);
  const auto qt = read_quantized(dir.path / "w.qtnq");
  CHECK(qt.scheme.bits == 4);
  CHECK(qt.scales.size() == 64);

  const std::string back = (dir.path / "back.qtns").string();
  CHECK(cli("dequantize --in " + (dir.path / "w.qtnq").string() + " --out " + back, dir.path).code == 0);
  const std::string fq = (dir.path / "fq.qtns").string();
  CHECK(cli("fake-quant --in " + w + " --bits 4 --granularity per-channel:0 --out " + fq, dir.path).code == 0);
  CHECK(read_tensor(back) == read_tensor(fq));

  const std::string pert = (dir.path / "p.qtns").string(), delta = (dir.path / "d.qtns").string();
  auto p = cli("perturb --in " + w + " --kind magneg --intensity match-l2 --seed 2 --out " + pert + " --delta-out " + delta,
               dir.path);
  CHECK_MESSAGE(p.code == 0, p.out);
  CHECK(read_tensor(pert) == add(read_tensor(w), read_tensor(delta)));

  auto sw = cli("sweep-scale --in " + w + " --alphas 0.25x,0.5x,1x,2x,4x", dir.path);
  CHECK(sw.code == 0);
  auto table = harness::parse_csv(sw.out);
  CHECK(table.header == std::vector<std::string>{"alpha", "l2_delta", "clip_fraction"});
  CHECK(table.rows.size() == 5);
}

TEST_CASE("exit codes") {
  TempDir dir;
  CHECK(cli("", dir.path).code == 1);
  CHECK(cli("frobnicate", dir.path).code == 1);
  CHECK(cli("gen --shape 4", dir.path).code == 1);
  CHECK(cli("quantize --in x.qtns --bits nine", dir.path).code == 1);
  CHECK(cli("gen --dist normal:0,1 --shape 4 --out " + (dir.path / "a.qtns").string() + " --bogus", dir.path).code == 1);
  CHECK(cli("--help", dir.path).code == 0);

  CHECK(cli("stats --in " + (dir.path / "missing.qtns").string(), dir.path).code == 2);
  std::ofstream(dir.path / "bad.qtns") << "NOPE0000";
  auto bad = cli("stats --in " + (dir.path / "bad.qtns").string(), dir.path);
  CHECK(bad.code == 2);
  CHECK(bad.out.find("bad magic") != std::string::npos);
  CHECK(cli("gen --dist normal:0,-1 --shape 4 --out " + (dir.path / "a.qtns").string(), dir.path).code == 1);

  write_tensor(dir.path / "zero.qtns", Tensor::zeros({8}));
  auto degenerate = cli("perturb --in " + (dir.path / "zero.qtns").string() + " --kind magpos --intensity l2:1 --out " +
                            (dir.path / "o.qtns").string(),
                        dir.path);
  CHECK_MESSAGE(degenerate.code == 3, degenerate.out);
}

TEST_CASE("experiment and report") {
  TempDir dir;
  harness::ExperimentConfig c;
  c.id = "cli";
  c.kind = harness::ExperimentKind::kPerturbCompare;
  c.inputs.push_back(harness::InputSource{"w", "", Normal{0, 1}, {128}, 1});
  c.schemes.push_back(QuantScheme{});
  c.perturbations = {"gaussian", "clip:3"};
  c.n_seeds = 2;
  c.output_dir = (dir.path / "out").string();
  std::ofstream(dir.path / "c.json") << harness::to_json(c).dump(2);
  auto ex = cli("experiment --quiet --config " + (dir.path / "c.json").string(), dir.path);
  REQUIRE_MESSAGE(ex.code == 0, ex.out);
  const fs::path csv = dir.path / "out" / "cli.csv";
  CHECK(fs::exists(csv));
  auto again = cli("experiment --quiet --config " + (dir.path / "c.json").string() + " --parallelism 3 --out " +
                       (dir.path / "out2").string(),
                   dir.path);
  CHECK(again.code == 0);
  CHECK(read_file(csv) == read_file(dir.path / "out2" / "cli.csv"));

  auto rp = cli("report --in " + csv.string() + " --out " + (dir.path / "rep").string(), dir.path);
  CHECK_MESSAGE(rp.code == 0, rp.out);
  CHECK(fs::exists(dir.path / "rep" / "summary.md"));

  std::ofstream(dir.path / "typo.json") << R"({"schema_version": 1, "kind": "kernel-sweep", "n_seedz": 2})";
  CHECK(cli("experiment --config " + (dir.path / "typo.json").string(), dir.path).code == 2);
  CHECK(cli("experiment --config x.json --preset figure2", dir.path).code == 1);

  c.inputs[0].path = (dir.path / "missing.qtns").string();
  c.inputs[0].dist.reset();
  std::ofstream(dir.path / "fail.json") << harness::to_json(c).dump(2);
  CHECK(cli("experiment --quiet --config " + (dir.path / "fail.json").string(), dir.path).code == 2);
}

}  // TEST_SUITE
