#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dapsk/config.hpp"
#include "dapsk/report.hpp"
#include "dapsk/simulate.hpp"

using namespace dapsk;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

namespace {

SimConfig small_config() {
  SimConfig cfg;
  cfg.uses = 32;
  cfg.antennas = 24;
  cfg.taps = 4;
  cfg.snr_db = {0, 10};
  cfg.blocks = 4;
  cfg.threads = 1;
  cfg.modes = {Mode::differential_onebit, Mode::differential_vql_lrt, Mode::coherent};
  return cfg;
}

}  // namespace

TEST_CASE("spectral efficiency gate") {
  CHECK(spectral_efficiency(0.0, 1.0, 4, 0.05) == 4.0);
  CHECK(spectral_efficiency(0.04, 0.5, 4, 0.05) == Approx(1.92).epsilon(1e-15));
  CHECK(spectral_efficiency(0.06, 1.0, 4, 0.05) == 0.0);
  CHECK(spectral_efficiency(0.05, 1.0, 4, 0.05) == Approx(3.8).epsilon(1e-15));
  CHECK_THROWS_AS(spectral_efficiency(1.5, 1.0, 4, 0.05), std::invalid_argument);
  SimConfig cfg;
  CHECK(data_fraction(cfg, Mode::differential_onebit) == 1.0);
  CHECK(data_fraction(cfg, Mode::coherent) == 0.5);
}

TEST_CASE("tally conservation") {
  BlockTally t;
  t.add_symbol(BitBlock{0, 1, 1, 0}, BitBlock{1, 1, 0, 1});
  t.add_symbol(BitBlock{0, 1, 1, 0}, BitBlock{0, 1, 1, 0});
  CHECK(t.symbols == 2);
  CHECK(t.bits == 8);
  CHECK(t.amp_errors == 1);
  CHECK(t.phase_errors == 2);
  CHECK(t.bit_errors == 3);
  CHECK(t.symbol_errors == 1);

  const auto cfg = small_config();
  for (Mode m : cfg.modes) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const auto b = run_block(cfg, m, 0.0, seed);
      CHECK(b.amp_errors + b.phase_errors == b.bit_errors);
      CHECK(b.symbol_errors <= b.symbols);
      CHECK(b.bits == b.symbols * 4);
    }
  }
  CHECK(run_block(cfg, Mode::differential_onebit, 0.0, 1).symbols == 31);
  CHECK(run_block(cfg, Mode::coherent, 0.0, 1).symbols == 16);
}

TEST_CASE("zero blocks give an empty tally") {
  const auto cfg = small_config();
  CHECK(run_blocks(cfg, Mode::differential_onebit, 0, 0) == BlockTally{});
  const auto r = make_record(cfg, Mode::differential_onebit, 0.0, 0, BlockTally{});
  CHECK(r.ber == 0.0);
  CHECK(r.se == 0.0);
}

TEST_CASE("identical seeds give identical tallies at any thread count") {
  auto cfg = small_config();
  cfg.blocks = 6;
  const auto a = run_blocks(cfg, Mode::differential_onebit, 1, 6);
  const auto b = run_blocks(cfg, Mode::differential_onebit, 1, 6);
  CHECK(a == b);
  cfg.threads = 3;
  CHECK(run_blocks(cfg, Mode::differential_onebit, 1, 6) == a);
  cfg.seed = 2;
  CHECK_FALSE(run_blocks(cfg, Mode::differential_onebit, 1, 6) == a);
}

TEST_CASE("genie amplitude at high SNR: phase errors stay at the sign-group floor with U = 96") {
  // A 32-antenna sign group misreads odd phase steps in roughly 0.35% of
  // noiseless frames (see the VQL phase detection test), so the floor is
  // small but not zero.
  SimConfig cfg;
  cfg.antennas = 96;
  cfg.taps = 31;
  cfg.threads = 1;
  Receivers rx;
  rx.amplitude = AmplitudeSource::genie;
  BlockTally t;
  for (std::uint64_t seed = 0; seed < 20; ++seed) t += run_block(cfg, Mode::differential_vql_nn, 60.0, seed, rx);
  CHECK(t.symbols == 20 * 255);
  CHECK(t.amp_errors == 0);
  CHECK(static_cast<double>(t.symbol_errors) / static_cast<double>(t.symbols) < 0.01);

  // Doubling the sign group removes the floor at this sample size.
  cfg.antennas = 192;
  BlockTally big;
  for (std::uint64_t seed = 0; seed < 20; ++seed) big += run_block(cfg, Mode::differential_vql_nn, 60.0, seed, rx);
  CHECK(big.phase_errors == 0);
}

TEST_CASE("nn mode without a model is an error") {
  auto cfg = small_config();
  cfg.modes = {Mode::differential_vql_nn};
  CHECK_THROWS_WITH(run_block(cfg, Mode::differential_vql_nn, 0.0, 1), ContainsSubstring("amplitude model"));
  CHECK_THROWS_WITH(prepare_receivers(cfg), ContainsSubstring("model"));
  cfg.model_path = "/nonexistent/model.json";
  CHECK_THROWS_WITH(prepare_receivers(cfg), ContainsSubstring("/nonexistent/model.json"));
}

TEST_CASE("nn mode rejects SNRs outside the model grid") {
  auto cfg = small_config();
  Rng rng(1);
  Receivers rx;
  rx.model = ModelFile{Mlp::random(6, std::vector<std::size_t>{4}, rng), {0, 10}, kModelSchemaVersion};
  CHECK_NOTHROW(run_block(cfg, Mode::differential_vql_nn, 10.0, 1, rx));
  CHECK_THROWS_WITH(run_block(cfg, Mode::differential_vql_nn, 5.0, 1, rx), ContainsSubstring("5.0"));
}

TEST_CASE("sweep output shape and empty grid") {
  auto cfg = small_config();
  const auto records = sweep(cfg);
  CHECK(records.size() == cfg.modes.size() * cfg.snr_db.size());
  for (const auto& r : records) {
    for (double v : {r.ber, r.amp_ber, r.phase_ber, r.ser}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    CHECK(r.ber == Approx(static_cast<double>(r.counts.bit_errors) / static_cast<double>(r.counts.bits)));
  }
  cfg.snr_db.clear();
  CHECK(sweep(cfg).empty());
}

TEST_CASE("csv format and roundtrip") {
  const auto cfg = small_config();
  const auto records = sweep(cfg);
  const auto text = to_csv(records);
  std::istringstream is(text);
  std::string header;
  std::getline(is, header);
  CHECK(header == "mode,snr_db,U,mod_order,blocks,ber,amp_ber,phase_ber,ser,se");
  std::size_t rows = 0;
  for (std::string line; std::getline(is, line);) ++rows;
  CHECK(rows == records.size());

  std::istringstream in(text);
  const auto parsed = parse_csv(in);
  REQUIRE(parsed.size() == records.size());
  for (std::size_t k = 0; k < parsed.size(); ++k) {
    CHECK(parsed[k].mode == records[k].mode);
    CHECK(parsed[k].snr_db == records[k].snr_db);
    CHECK(parsed[k].antennas == records[k].antennas);
    CHECK(parsed[k].mod_order == records[k].mod_order);
    CHECK(parsed[k].blocks == records[k].blocks);
    CHECK(parsed[k].ber == records[k].ber);
    CHECK(parsed[k].amp_ber == records[k].amp_ber);
    CHECK(parsed[k].phase_ber == records[k].phase_ber);
    CHECK(parsed[k].ser == records[k].ser);
    CHECK(parsed[k].se == records[k].se);
  }
  CHECK(to_csv({}) == std::string(kCsvHeader) + "\n");

  std::istringstream bad_header("mode,snr\n");
  CHECK_THROWS_AS(parse_csv(bad_header), std::runtime_error);
  std::istringstream bad_row(std::string(kCsvHeader) + "\ncoherent,1,2\n");
  CHECK_THROWS_WITH(parse_csv(bad_row), ContainsSubstring("line 2"));
  std::istringstream bad_num(std::string(kCsvHeader) + "\ncoherent,x,96,16,1,0,0,0,0,0\n");
  CHECK_THROWS_WITH(parse_csv(bad_num), ContainsSubstring("malformed"));
}

TEST_CASE("csv and svg files") {
  const auto cfg = small_config();
  const auto records = sweep(cfg);
  const auto dir = std::filesystem::temp_directory_path();
  const auto csv = (dir / "dapsk_harness.csv").string();
  const auto svg = (dir / "dapsk_harness.svg").string();
  emit_csv(records, csv);
  emit_svg(records, svg);
  std::ifstream is(csv);
  CHECK(parse_csv(is).size() == records.size());
  std::ifstream sv(svg);
  const std::string text((std::istreambuf_iterator<char>(sv)), std::istreambuf_iterator<char>());
  CHECK(text.rfind("<svg", 0) == 0);
  CHECK_THAT(text, ContainsSubstring("polyline"));
  CHECK_THAT(text, ContainsSubstring("differential-onebit U=24 16-pt"));
  std::filesystem::remove(csv);
  std::filesystem::remove(svg);

  CHECK_THROWS_WITH(emit_csv(records, "/nonexistent-dir/out.csv"), ContainsSubstring("/nonexistent-dir/out.csv"));
  CHECK_THROWS_AS(emit_svg({}, svg), std::invalid_argument);
}

TEST_CASE("config parsing") {
  std::istringstream is(
      "# campaign\n"
      "uses = 64\n"
      "antennas = 30   # trailing comment\n"
      "snr_db = 0, 5,10\n"
      "modes = coherent, differential-onebit\n"
      "hidden = 16,8\n"
      "train_model = true\n"
      "coherent_alphabet = apsk\n");
  const auto cfg = parse_config(is);
  CHECK(cfg.uses == 64);
  CHECK(cfg.antennas == 30);
  CHECK(cfg.snr_db == std::vector<double>{0, 5, 10});
  CHECK(cfg.modes == std::vector<Mode>{Mode::coherent, Mode::differential_onebit});
  CHECK(cfg.hidden == std::vector<std::size_t>{16, 8});
  CHECK(cfg.train_model);
  CHECK(cfg.group_sizes() == std::array<int, 3>{10, 10, 10});
  CHECK_NOTHROW(cfg.validate());

  auto parse = [](const std::string& text) {
    std::istringstream s(text);
    return parse_config(s);
  };
  CHECK_THROWS_WITH(parse("bogus = 1\n"), ContainsSubstring("unknown key 'bogus'"));
  CHECK_THROWS_WITH(parse("uses = 1\nantennas\n"), ContainsSubstring("line 2"));
  CHECK_THROWS_WITH(parse("blocks = ten\n"), ContainsSubstring("not an integer"));
  CHECK_THROWS_WITH(parse("mode = magic\n"), ContainsSubstring("unknown mode"));
  CHECK_THROWS_WITH(parse("train_model = maybe\n"), ContainsSubstring("true/false"));
  CHECK_THROWS_AS(load_config("/nonexistent/cfg.txt"), std::runtime_error);

  SimConfig bad;
  bad.snr_db = {5, 0};
  CHECK_THROWS_WITH(bad.validate(), ContainsSubstring("strictly increasing"));
  bad = SimConfig{};
  bad.group1 = 10;
  bad.group2 = 10;
  bad.group3 = 10;
  CHECK_THROWS_WITH(bad.validate(), ContainsSubstring("sum to antennas"));
  bad = SimConfig{};
  bad.blocks = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = SimConfig{};
  bad.pdp = "triangle";
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = SimConfig{};
  bad.blocks = 0;
  CHECK_THROWS_AS(sweep(bad), std::invalid_argument);
}

TEST_CASE("trained model is used by nn mode") {
  auto cfg = small_config();
  cfg.modes = {Mode::differential_vql_nn};
  cfg.train_model = true;
  cfg.train_samples = 200;
  cfg.epochs = 3;
  cfg.batch_size = 50;
  cfg.hidden = {8};
  const auto rx = prepare_receivers(cfg);
  REQUIRE(rx.model.has_value());
  CHECK(rx.model->snr_grid_db == cfg.snr_db);
  CHECK(rx.model->model.input_dim() == 4 + cfg.snr_db.size());
  const auto records = sweep(cfg, rx);
  CHECK(records.size() == 2);
  CHECK(train_amplitude_model(cfg).model == rx.model->model);
}
