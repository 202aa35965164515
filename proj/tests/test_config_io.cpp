#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "doctest.h"
#include "noisecurve/checkpoint.hpp"
#include "noisecurve/config.hpp"
#include "noisecurve/errors.hpp"
#include "noisecurve/model.hpp"
#include "noisecurve/tensor.hpp"

using namespace noisecurve;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::ok;
}

}  // namespace

TEST_CASE("config parses comments, blanks and typed values") {
  Config cfg = Config::parse(
      "# leading comment\n"
      "\n"
      "train.epochs = 12\n"
      "train.lr=0.05   # trailing comment\n"
      "name = blobs run\n"
      "flag = true\n"
      "dims = 32,16\n"
      "big = 18446744073709551615\n");
  CHECK(cfg.get_int("train.epochs") == 12);
  CHECK(cfg.get_double("train.lr") == 0.05);
  CHECK(cfg.get_string("name") == "blobs run");
  CHECK(cfg.get_bool("flag"));
  CHECK(cfg.get_size_list("dims") == std::vector<std::size_t>{32, 16});
  CHECK(cfg.get_u64("big") == 18446744073709551615ull);
  CHECK_NOTHROW(cfg.require_all_consumed());
}

TEST_CASE("config fallbacks and consumption") {
  Config cfg = Config::parse("a = 1\n");
  CHECK(cfg.get_int("missing", 7) == 7);
  CHECK(cfg.get_string("gone", "dflt") == "dflt");
  CHECK(cfg.get_double("nope", 2.5) == 2.5);
  CHECK(cfg.get_bool("no", false) == false);
  CHECK(cfg.get_size_list("none", {4}) == std::vector<std::size_t>{4});
  CHECK(cfg.has("a"));
  CHECK_FALSE(cfg.has("b"));
  // 'a' was never read: require_all_consumed names it.
  CHECK(code_of([&] { cfg.require_all_consumed(); }) == ErrorCode::config);
  CHECK(cfg.get_int("a", 0) == 1);
  CHECK_NOTHROW(cfg.require_all_consumed());
}

TEST_CASE("config rejections") {
  CHECK(code_of([] { (void)Config::parse("x = 1\nx = 2\n"); }) ==
        ErrorCode::config);
  CHECK(code_of([] { (void)Config::parse("just a bare line\n"); }) ==
        ErrorCode::config);
  Config cfg = Config::parse("n = pelican\nb = maybe\nl = 3,x\n");
  CHECK(code_of([&] { (void)cfg.get_int("n"); }) == ErrorCode::config);
  CHECK(code_of([&] { (void)cfg.get_bool("b"); }) == ErrorCode::config);
  CHECK(code_of([&] { (void)cfg.get_size_list("l"); }) == ErrorCode::config);
  Config empty = Config::parse("");
  CHECK(code_of([&] { (void)empty.get_string("absent"); }) ==
        ErrorCode::config);
}

TEST_CASE("unknown keys are reported by name") {
  Config cfg = Config::parse("train.epochs = 2\nmystery.key = 1\n");
  (void)cfg.get_int("train.epochs");
  try {
    cfg.require_all_consumed();
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::config);
    CHECK(std::string(e.what()).find("mystery.key") != std::string::npos);
  }
}

TEST_CASE("keys_with_prefix is sorted and non-consuming") {
  Config cfg = Config::parse("p.b = 1\np.a = 2\nq.c = 3\n");
  std::vector<std::string> keys = cfg.keys_with_prefix("p.");
  CHECK(keys == std::vector<std::string>{"p.a", "p.b"});
  // Listing did not consume; reading all three satisfies the check.
  (void)cfg.get_int("p.a");
  (void)cfg.get_int("p.b");
  (void)cfg.get_int("q.c");
  CHECK_NOTHROW(cfg.require_all_consumed());
}

TEST_CASE("set upserts and load reads files") {
  Config cfg = Config::parse("a = 1\n");
  cfg.set("a", "2");
  cfg.set("b", "3");
  CHECK(cfg.get_int("a") == 2);
  CHECK(cfg.get_int("b") == 3);

  fs::path p = fs::temp_directory_path() / "noisecurve-tests" / "cfg.txt";
  fs::create_directories(p.parent_path());
  {
    std::ofstream out(p);
    out << "k = v\n";
  }
  Config loaded = Config::load(p.string());
  CHECK(loaded.get_string("k") == "v");
  CHECK(code_of([] { (void)Config::load("/no/such/file.cfg"); }) ==
        ErrorCode::io);
}

TEST_CASE("environment seed override") {
  unsetenv("NOISECURVE_SEED");
  CHECK_FALSE(env_seed_override().has_value());
  setenv("NOISECURVE_SEED", "123", 1);
  CHECK(env_seed_override() == std::optional<std::uint64_t>(123));
  setenv("NOISECURVE_SEED", "pelican", 1);
  CHECK(code_of([] { (void)env_seed_override(); }) == ErrorCode::config);
  unsetenv("NOISECURVE_SEED");
}

TEST_CASE("checkpoint json round-trips byte for byte") {
  Checkpoint ck;
  ck.version = 1;
  ck.seed = 31337;
  ck.model = make_mlp(std::vector<std::size_t>{4, 6, 3}, 3, 77);
  ck.centroids.gamma = 0.9;
  ck.centroids.mode = CentroidMode::partial;
  ck.centroids.previous[0] = Tensor::vector({0.1, -0.2, 1.0 / 3.0});
  ck.centroids.previous[2] = Tensor::vector({2.0, 0.0, -5.25});
  ck.loss.delta_v = 0.4;
  ck.loss.delta_d = 1.7;
  ck.loss.alpha = 0.25;

  const std::string text = checkpoint_to_json(ck);
  Checkpoint back = checkpoint_from_json(text);
  CHECK(checkpoint_to_json(back) == text);
  CHECK(back.seed == ck.seed);
  CHECK(back.model.class_count() == 3);
  CHECK(back.model.layers[0].w == ck.model.layers[0].w);
  CHECK(back.model.layers[0].relu_after == ck.model.layers[0].relu_after);
  CHECK(back.model.head_w == ck.model.head_w);
  CHECK(back.centroids.previous[2] == ck.centroids.previous[2]);
  CHECK(back.centroids.mode == CentroidMode::partial);
  CHECK(back.loss.alpha == 0.25);

  fs::path p = fs::temp_directory_path() / "noisecurve-tests" / "ck.json";
  fs::create_directories(p.parent_path());
  save_checkpoint(ck, p.string());
  Checkpoint loaded = load_checkpoint(p.string());
  CHECK(checkpoint_to_json(loaded) == text);
}

TEST_CASE("checkpoint parser failure modes") {
  CHECK(code_of([] { (void)checkpoint_from_json("{]"); }) ==
        ErrorCode::format_header);
  CHECK(code_of([] { (void)checkpoint_from_json("{\"version\": 1}"); }) ==
        ErrorCode::format_header);
  Checkpoint ck;
  ck.model = make_mlp(std::vector<std::size_t>{2, 2}, 2, 1);
  std::string text = checkpoint_to_json(ck);
  const std::string from = "\"version\": 1";
  text.replace(text.find(from), from.size(), "\"version\": 3");
  CHECK(code_of([&] { (void)checkpoint_from_json(text); }) ==
        ErrorCode::format_header);
  CHECK(code_of([] { (void)load_checkpoint("/no/such/ck.json"); }) ==
        ErrorCode::io);
}
