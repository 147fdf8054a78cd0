#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <string>
#include <vector>

#include "bnpsurv/io.hpp"

using Catch::Matchers::ContainsSubstring;
using bnpsurv::Dataset;
using bnpsurv::McmcConfig;
using bnpsurv::Observation;
using bnpsurv::Rng;

namespace {

Dataset two_group_data(std::uint64_t seed = 81) {
  Rng rng(seed);
  std::vector<Observation> obs;
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 12; ++i)
      obs.push_back({std::exp(0.4 * rng.normal()), i % 3 != 0, j});
  return bnpsurv::validate(bnpsurv::dataset_from(obs));
}

McmcConfig tiny_config() {
  McmcConfig c;
  c.iterations = 12;
  c.burn_in = 6;
  c.thin = 2;
  c.truncation_l = 4;
  c.truncation_k = 3;
  c.seed = 9;
  return c;
}

}  // namespace

TEST_CASE("dataset csv parsing") {
  const std::string text = "group,time,status\nA,1.5,1\nA,2.0,0\nB,0.7,1\n";
  const auto parsed = bnpsurv::parse_dataset(text);
  REQUIRE(parsed.dataset.group_count == 2);
  REQUIRE(parsed.dataset.group_sizes == std::vector<int>{2, 1});
  REQUIRE(parsed.group_labels == std::vector<std::string>{"A", "B"});
  REQUIRE(parsed.dataset.observations[0].time == 1.5);
  REQUIRE(parsed.dataset.observations[0].event);
  REQUIRE_FALSE(parsed.dataset.observations[1].event);
  REQUIRE(parsed.dataset.observations[2].group == 1);

  // final newline and blank lines are immaterial
  REQUIRE(bnpsurv::parse_dataset("group,time,status\nA,1.5,1\n\nA,2.0,0\nB,0.7,1") == parsed);
}

TEST_CASE("dataset csv rejections name the offending row") {
  REQUIRE_THROWS_WITH(bnpsurv::parse_dataset("group,time,status\nA,1.5,1\nB,0.7,2\n"),
                      ContainsSubstring("dataset row 3"));
  REQUIRE_THROWS_WITH(bnpsurv::parse_dataset("group,time,status\nA,0.0,1\n"),
                      ContainsSubstring("dataset row 2"));
  REQUIRE_THROWS_WITH(bnpsurv::parse_dataset("group,time,status\nA,-2,1\n"),
                      ContainsSubstring("time must be positive"));
  REQUIRE_THROWS_WITH(bnpsurv::parse_dataset("group,time,status\nA,abc,1\n"),
                      ContainsSubstring("bad number"));
  REQUIRE_THROWS_WITH(bnpsurv::parse_dataset("group,time,status\nA,1.5\n"),
                      ContainsSubstring("expected 3 columns"));
  REQUIRE_THROWS_WITH(bnpsurv::parse_dataset("group,time,status\n,1.5,1\n"),
                      ContainsSubstring("empty group label"));
  REQUIRE_THROWS_WITH(bnpsurv::parse_dataset("time,group,status\nA,1.5,1\n"),
                      ContainsSubstring("missing header"));
  REQUIRE_THROWS_WITH(bnpsurv::parse_dataset("group,time,status\n"),
                      ContainsSubstring("no data rows"));
}

TEST_CASE("dataset csv round-trips exactly") {
  const Dataset data = two_group_data();
  const std::vector<std::string> labels{"ctrl", "treat"};
  const std::string text = bnpsurv::serialize_dataset(data, labels);
  const auto parsed = bnpsurv::parse_dataset(text);
  REQUIRE(parsed.dataset == data);
  REQUIRE(parsed.group_labels == labels);
  // shortest-exact float formatting makes the second pass byte-stable
  REQUIRE(bnpsurv::serialize_dataset(parsed.dataset, parsed.group_labels) == text);

  REQUIRE(bnpsurv::numeric_labels(3) == std::vector<std::string>{"0", "1", "2"});
  REQUIRE_THROWS_AS(bnpsurv::serialize_dataset(data, {"only"}), std::invalid_argument);
}

TEST_CASE("truth sidecar round-trip and alignment") {
  bnpsurv::SimulatedDataset sim;
  sim.true_mixture_per_group = {1, 0};
  sim.true_frailty_per_group = {0.5, 2.25};
  const std::vector<std::string> labels{"g1", "g0"};
  const std::string text = bnpsurv::serialize_truth(sim, labels);
  const auto truth = bnpsurv::parse_truth(text);
  REQUIRE(truth.group_labels == labels);
  REQUIRE(truth.mixture == std::vector<int>{1, 0});
  REQUIRE(truth.frailty == std::vector<double>{0.5, 2.25});

  // alignment follows the dataset's label order, not the file's
  const auto aligned = bnpsurv::align_truth(truth, {"g0", "g1"});
  REQUIRE(aligned.mixture == std::vector<int>{0, 1});
  REQUIRE(aligned.frailty == std::vector<double>{2.25, 0.5});

  REQUIRE_THROWS_WITH(bnpsurv::align_truth(truth, {"g0", "gX"}),
                      ContainsSubstring("no row for group 'gX'"));
  REQUIRE_THROWS_WITH(bnpsurv::parse_truth("group,mixture,frailty\nA,-1,0.5\n"),
                      ContainsSubstring("negative mixture index"));
  REQUIRE_THROWS_WITH(bnpsurv::parse_truth("group,mixture,frailty\nA,0,0\n"),
                      ContainsSubstring("frailty must be positive"));
  REQUIRE_THROWS_WITH(bnpsurv::parse_truth("wrong\n"), ContainsSubstring("missing header"));
}

TEST_CASE("trace files round-trip every model") {
  const Dataset data = two_group_data();
  const auto base = bnpsurv::default_base_measure(data);
  const McmcConfig config = tiny_config();
  const std::vector<double> grid{0.5, 1.0, 2.0};

  for (const auto model :
       {bnpsurv::ModelKind::dp, bnpsurv::ModelKind::hdp, bnpsurv::ModelKind::ndp}) {
    const bnpsurv::AnyTrace trace = bnpsurv::run_chain(model, data, config, base);
    const std::string text = bnpsurv::serialize_trace(trace, data.group_count);
    const bnpsurv::AnyTrace parsed = bnpsurv::parse_trace(text);

    // identical mixtures per group and draw once read back
    for (int j = 0; j < data.group_count; ++j) {
      const auto original = std::visit(
          [&](const auto& t) { return bnpsurv::posterior_survival_draws(t, j, grid); }, trace);
      const auto reread = std::visit(
          [&](const auto& t) { return bnpsurv::posterior_survival_draws(t, j, grid); }, parsed);
      REQUIRE(original == reread);
    }

    // the sampling plan survives the trip, and a second pass is byte-stable
    const auto parsed_config =
        std::visit([](const auto& t) { return t.config; }, parsed);
    REQUIRE(parsed_config == config);
    REQUIRE(bnpsurv::serialize_trace(parsed, data.group_count) == text);
  }
}

TEST_CASE("trace files reject damage loudly") {
  const Dataset data = two_group_data();
  const McmcConfig config = tiny_config();
  const bnpsurv::AnyTrace trace =
      bnpsurv::run_chain(bnpsurv::ModelKind::dp, data, config,
                         bnpsurv::default_base_measure(data));
  const std::string text = bnpsurv::serialize_trace(trace, data.group_count);

  REQUIRE_THROWS_WITH(bnpsurv::parse_trace("nonsense\n"), ContainsSubstring("magic"));

  std::string wrong_model = text;
  wrong_model.replace(wrong_model.find("model dp"), 8, "model gp");
  REQUIRE_THROWS_WITH(bnpsurv::parse_trace(wrong_model), ContainsSubstring("unknown model"));

  const std::string cut = text.substr(0, text.size() / 2);
  REQUIRE_THROWS_AS(bnpsurv::parse_trace(cut), std::invalid_argument);

  std::string reordered = text;
  reordered.replace(reordered.find("state 1"), 7, "state 9");
  REQUIRE_THROWS_WITH(bnpsurv::parse_trace(reordered), ContainsSubstring("out-of-order"));
}

TEST_CASE("metrics csv serialization") {
  std::vector<bnpsurv::MetricsRow> rows;
  rows.push_back({"gfm", "J30_n20", 2, -1.5, 0.25, 0.5});
  REQUIRE(bnpsurv::serialize_metrics(rows) ==
          "model,scenario,replicate,mean_lppd,mean_width,coverage\n"
          "gfm,J30_n20,2,-1.5,0.25,0.5\n");
}

TEST_CASE("flat config text") {
  const std::string text =
      "# cli defaults\n"
      "seed = 7\n"
      "\n"
      "[mcmc]\n"
      "iterations = 100\n"
      "thin=2\n";
  const auto kv = bnpsurv::parse_config_text(text);
  REQUIRE(kv.size() == 3);
  REQUIRE(kv.at("seed") == "7");
  REQUIRE(kv.at("mcmc.iterations") == "100");
  REQUIRE(kv.at("mcmc.thin") == "2");

  REQUIRE_THROWS_WITH(bnpsurv::parse_config_text("[mcmc\nx = 1\n"),
                      ContainsSubstring("config line 1"));
  REQUIRE_THROWS_WITH(bnpsurv::parse_config_text("seed = 1\nnovalue\n"),
                      ContainsSubstring("config line 2"));
  REQUIRE_THROWS_WITH(bnpsurv::parse_config_text("= 5\n"), ContainsSubstring("empty key"));
}

TEST_CASE("file helpers") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::path("io_test_tmp");
  fs::create_directories(dir);

  const std::string path = (dir / "sample.txt").string();
  REQUIRE(bnpsurv::atomic_write_text(path, "alpha\nbeta\n"));
  REQUIRE(bnpsurv::read_text_file(path) == std::string("alpha\nbeta\n"));
  REQUIRE_FALSE(fs::exists(path + ".tmp"));

  // overwrite in place
  REQUIRE(bnpsurv::atomic_write_text(path, "gamma"));
  REQUIRE(bnpsurv::read_text_file(path) == std::string("gamma"));

  // a file cannot act as a parent directory
  const std::string blocked = (fs::path(path) / "child.txt").string();
  REQUIRE_FALSE(bnpsurv::atomic_write_text(blocked, "x"));

  REQUIRE_FALSE(bnpsurv::read_text_file((dir / "absent.txt").string()).has_value());

  fs::remove_all(dir);
}
