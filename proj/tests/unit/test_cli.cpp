#include <doctest.h>

#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "helpers.hpp"

using edgecache::cli::main;
using testing::read_file;
using testing::TempDir;
using testing::write_file;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = main(args, out, err);
  return {code, out.str(), err.str()};
}

const std::string kData = EDGECACHE_DATA_DIR;

const char* kMovies =
    "movieId,title,genres\n"
    "1,Toy Story (1995),Adventure|Animation|Children|Comedy|Fantasy\n"
    "2,Heat (1995),Action|Crime|Thriller\n"
    "3,\"American President, The (1995)\",Comedy|Drama|Romance\n";

const char* kRatings =
    "userId,movieId,rating,timestamp\n"
    "1,2,4.0,7300\n"
    "2,1,3.5,100\n"
    "1,1,5.0,200\n"
    "2,3,2.0,3700\n";

fs::path small_config(const TempDir& dir, bool concentrated = true) {
  nlohmann::json doc = {
      {"seed", 3},
      {"synth",
       {{"users", 10}, {"periods", 20}, {"contents_per_period", 10},
        {"concentrated", concentrated}, {"shared_preference", 0.8}}},
      {"sim", {{"M", 3}, {"phi", 2}}},
      {"policies", {"PROPOSED", "LRU"}}};
  const auto path = dir / "config.json";
  write_file(path, doc.dump());
  return path;
}

std::size_t count_lines(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_CASE("ingest prints the exact request count and writes a normalized trace") {
  TempDir dir;
  write_file(dir / "movies.csv", kMovies);
  write_file(dir / "ratings.csv", kRatings);
  const auto r = cli({"ingest", "--ratings", (dir / "ratings.csv").string(), "--movies",
                      (dir / "movies.csv").string(), "--out-dir", (dir / "out").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("requests: 4\n") != std::string::npos);
  CHECK(r.out.find("users: 2\n") != std::string::npos);
  CHECK(r.out.find("contents: 3\n") != std::string::npos);
  CHECK(r.out.find("time range: 100 .. 7300\n") != std::string::npos);
  CHECK(fs::exists(dir / "out" / "trace.csv"));
}

TEST_CASE("ingest with a missing metadata file exits 2 naming the path") {
  TempDir dir;
  write_file(dir / "ratings.csv", kRatings);
  const auto missing = (dir / "nope.csv").string();
  const auto r = cli({"ingest", "--ratings", (dir / "ratings.csv").string(), "--movies", missing,
                      "--out-dir", (dir / "out").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find(missing) != std::string::npos);
}

TEST_CASE("synthetic output goes through the same ingest path") {
  TempDir dir;
  const auto s = cli({"synth", "--config", small_config(dir).string(), "--out-dir",
                      (dir / "world").string()});
  REQUIRE(s.code == 0);
  const auto i = cli({"ingest", "--ratings", (dir / "world" / "ratings.csv").string(), "--movies",
                      (dir / "world" / "movies.csv").string(), "--out", (dir / "t.csv").string()});
  REQUIRE(i.code == 0);
  const auto first_line = [](const std::string& text) { return text.substr(0, text.find('\n')); };
  CHECK(first_line(s.out) == first_line(i.out));
  CHECK(fs::exists(dir / "world" / "world.json"));
}

TEST_CASE("run on the bundled planted trace at capacity 60") {
  TempDir dir;
  const auto r = cli({"run", "--config", kData + "/planted_spread.json", "--capacity", "60",
                      "--policy", "PROPOSED", "--policy", "LRU", "--out-dir", dir.path().string()});
  REQUIRE(r.code == 0);
  const auto doc = nlohmann::json::parse(read_file(dir / "summary.json"));
  double proposed = -1, lru = -1;
  for (const auto& run : doc.at("runs")) {
    const auto h = run.at("overall_H").get<double>();
    if (run.at("policy") == "PROPOSED") proposed = h;
    if (run.at("policy") == "LRU") lru = h;
  }
  REQUIRE(proposed >= 0);
  REQUIRE(lru >= 0);
  CHECK(proposed >= lru);
  CHECK(r.out.find("PROPOSED capacity=60 overall_H=") != std::string::npos);
  CHECK(fs::exists(dir / "decisions_PROPOSED_60.csv"));
  CHECK(fs::exists(dir / "decisions_LRU_60.csv"));
}

TEST_CASE("run is byte-identical for a fixed seed, flags override the file") {
  TempDir dir;
  const auto config = small_config(dir).string();
  for (const char* sub : {"a", "b"}) {
    REQUIRE(cli({"run", "--config", config, "--seed", "11", "--jobs", "2", "--out-dir",
                 (dir / sub).string()})
                .code == 0);
  }
  CHECK(read_file(dir / "a" / "metrics.csv") == read_file(dir / "b" / "metrics.csv"));
  CHECK(read_file(dir / "a" / "summary.json") == read_file(dir / "b" / "summary.json"));
  CHECK(read_file(dir / "a" / "decisions_PROPOSED_6.csv") ==
        read_file(dir / "b" / "decisions_PROPOSED_6.csv"));

  REQUIRE(cli({"run", "--config", config, "--seed", "12", "--out-dir", (dir / "c").string()}).code == 0);
  CHECK(read_file(dir / "a" / "metrics.csv") != read_file(dir / "c" / "metrics.csv"));
}

TEST_CASE("sweep writes one row per policy and capacity") {
  TempDir dir;
  const auto r = cli({"sweep", "--config", small_config(dir).string(), "--out-dir",
                      (dir / "out").string(), "--jobs", "4"});
  REQUIRE(r.code == 0);
  const auto csv = read_file(dir / "out" / "sweep.csv");
  // Config policies are kept; the default capacities apply.
  CHECK(count_lines(csv) == 1 + 2 * 5);
  for (const char* cap : {",60,", ",600,", ",1800,", ",2400,", ",4800,"}) {
    CHECK(csv.find(std::string("PROPOSED") + cap) != std::string::npos);
  }

  const auto all = cli({"sweep", "--config", small_config(dir).string(), "--out-dir",
                        (dir / "all").string(), "--policy", "FIFO", "--policy", "LRU", "--policy",
                        "LFU", "--policy", "OPTIMAL", "--policy", "PROPOSED", "--capacity", "60"});
  REQUIRE(all.code == 0);
  CHECK(count_lines(read_file(dir / "all" / "sweep.csv")) == 1 + 5);
}

TEST_CASE("bounds pass on the planted concentrated trace and fail on a corrupted prediction") {
  TempDir dir;
  REQUIRE(cli({"run", "--config", kData + "/planted_concentrated.json", "--out-dir",
               dir.path().string()})
              .code == 0);
  const auto ok = cli({"bounds", "--run-dir", dir.path().string()});
  CHECK(ok.code == 0);
  CHECK(ok.out.find("checked=200 failed=0 regime_violations=0") != std::string::npos);
  const auto report = nlohmann::json::parse(read_file(dir / "bounds_PROPOSED_21.json"));
  CHECK(report.is_object());

  // Replace the p_hat of the first decision row with 1.7.
  const auto path = dir / "decisions_PROPOSED_21.csv";
  auto text = read_file(path);
  const auto row_start = text.find('\n') + 1;
  const auto row_end = text.find('\n', row_start);
  const auto comma = text.rfind(',', row_end);
  text.replace(comma + 1, row_end - comma - 1, "1.7");
  write_file(path, text);
  CHECK(cli({"bounds", "--run-dir", dir.path().string()}).code == 5);
}

TEST_CASE("bounds on a spread trace report regime violations without failing") {
  TempDir dir;
  REQUIRE(cli({"run", "--config", small_config(dir, false).string(), "--out-dir",
               (dir / "out").string()})
              .code == 0);
  const auto r = cli({"bounds", "--run-dir", (dir / "out").string()});
  CHECK(r.code == 0);
  const auto report = nlohmann::json::parse(read_file(dir / "out" / "bounds_PROPOSED_6.json"));
  CHECK(report.dump().find("regime_violations") != std::string::npos);
}

TEST_CASE("configuration errors exit 3") {
  TempDir dir;
  const auto config = small_config(dir).string();
  const auto out = (dir / "out").string();
  CHECK(cli({"run", "--config", config, "--capacity", "61", "--out-dir", out}).code == 3);
  CHECK(cli({"run", "--config", config, "--policy", "MRU", "--out-dir", out}).code == 3);
  CHECK(cli({"run", "--config", config, "--jobs", "0", "--out-dir", out}).code == 3);
  CHECK(cli({"run", "--bogus-flag"}).code == 3);
  CHECK(cli({}).code == 3);

  write_file(dir / "unknown.json", R"({"seed": 1, "synth": {}, "colour": "red"})");
  const auto unknown = cli({"run", "--config", (dir / "unknown.json").string(), "--out-dir", out});
  CHECK(unknown.code == 3);
  CHECK(unknown.err.find("colour") != std::string::npos);

  write_file(dir / "nested.json", R"({"synth": {"users": 5, "speed": 2}})");
  CHECK(cli({"run", "--config", (dir / "nested.json").string(), "--out-dir", out}).code == 3);

  write_file(dir / "broken.json", "{ not json");
  CHECK(cli({"run", "--config", (dir / "broken.json").string(), "--out-dir", out}).code == 3);

  write_file(dir / "type.json", R"({"sim": {"M": "three"}, "synth": {}})");
  CHECK(cli({"run", "--config", (dir / "type.json").string(), "--out-dir", out}).code == 3);

  // Nothing ran, so nothing was written.
  CHECK_FALSE(fs::exists(dir / "out" / "metrics.csv"));
}

TEST_CASE("input errors exit 2") {
  TempDir dir;
  CHECK(cli({"run", "--config", (dir / "absent.json").string()}).code == 2);
  CHECK(cli({"run", "--trace", (dir / "absent.csv").string(), "--out-dir", dir.path().string()})
            .code == 2);
  CHECK(cli({"bounds", "--run-dir", (dir / "empty").string()}).code == 2);
}

TEST_CASE("help exits 0") { CHECK(cli({"--help"}).code == 0); }

TEST_CASE("null leaves optional config values unset") {
  TempDir dir;
  write_file(dir / "null.json", R"({"seed": 3, "synth": {"users": 10, "periods": 20},
                                     "sim": {"origin": null, "M": 3, "phi": 2},
                                     "trace": {"init_cutoff": null}})");
  CHECK(cli({"run", "--config", (dir / "null.json").string(), "--out-dir", (dir / "out").string()})
            .code == 0);
}
