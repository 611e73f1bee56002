#include <doctest.h>

#include "ddacdn/config.hpp"

using namespace ddacdn;

TEST_CASE("config parsing") {
    SUBCASE("key value with comments and blanks") {
        Config cfg = parse_config_text("# comment\n\nloss.gamma = 1.5\nloss.alpha=0.3 # tail\n",
                                       "test");
        TrainConfig tc;
        cfg.apply(tc);
        CHECK(tc.focal.gamma == 1.5);
        CHECK(tc.focal.alpha == 0.3);
    }
    SUBCASE("empty file keeps every default") {
        Config cfg = parse_config_text("", "test");
        TrainConfig tc, ref;
        cfg.apply(tc);
        CHECK(tc.epochs == ref.epochs);
        CHECK(tc.lr == ref.lr);
        CHECK(tc.focal.gamma == ref.focal.gamma);
        CHECK(tc.weights.eta_box == ref.weights.eta_box);
    }
    SUBCASE("unknown key suggests the nearest valid key") {
        CHECK_THROWS_WITH_AS(parse_config_text("loss.gama = 1.5\n", "test"),
                             doctest::Contains("loss.gamma"), std::runtime_error);
    }
    SUBCASE("duplicate keys rejected with the line number") {
        CHECK_THROWS_WITH_AS(parse_config_text("train.lr = 0.1\ntrain.lr = 0.2\n", "test"),
                             doctest::Contains("test:2"), std::runtime_error);
    }
    SUBCASE("missing equals sign rejected") {
        CHECK_THROWS_WITH_AS(parse_config_text("just words\n", "test"),
                             doctest::Contains("test:1"), std::runtime_error);
    }
}

TEST_CASE("typed accessors") {
    Config cfg = parse_config_text(
        "train.epochs = 7\ntrain.use_apage = false\nloss.balance = 1, 2, 3\n"
        "apage.clahe_tiles = 4x8\ntrain.optimizer = adam\n",
        "test");
    TrainConfig tc;
    cfg.apply(tc);
    CHECK(tc.epochs == 7);
    CHECK(tc.use_apage == false);
    CHECK(tc.weights.balance[0] == 1.0);
    CHECK(tc.weights.balance[2] == 3.0);
    CHECK(tc.apage.clahe_tiles_y == 4);
    CHECK(tc.apage.clahe_tiles_x == 8);
    CHECK(tc.optimizer == Optimizer::adam);
}

TEST_CASE("value validation errors") {
    SUBCASE("non-numeric number") {
        Config cfg = parse_config_text("train.lr = fast\n", "test");
        TrainConfig tc;
        CHECK_THROWS_AS(cfg.apply(tc), std::runtime_error);
    }
    SUBCASE("bad boolean") {
        Config cfg = parse_config_text("train.use_apage = maybe\n", "test");
        TrainConfig tc;
        CHECK_THROWS_AS(cfg.apply(tc), std::runtime_error);
    }
    SUBCASE("wrong list arity") {
        Config cfg = parse_config_text("loss.beta = 0.1, 0.2\n", "test");
        TrainConfig tc;
        CHECK_THROWS_WITH_AS(cfg.apply(tc), doctest::Contains("3"), std::runtime_error);
    }
    SUBCASE("module validation still applies") {
        Config cfg = parse_config_text("train.lr = -1\n", "test");
        TrainConfig tc;
        CHECK_THROWS_AS(cfg.apply(tc), std::invalid_argument);
    }
}

TEST_CASE("synth spec keys") {
    Config cfg = parse_config_text(
        "synth.image_size = 32\nsynth.source_train_per_category = 5\n", "test");
    SynthSpec spec;
    cfg.apply(spec);
    CHECK(spec.image_size == 32);
    CHECK(spec.source_train_per_category == 5);
}
