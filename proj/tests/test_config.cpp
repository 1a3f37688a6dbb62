#include <fstream>

#include "doctest.h"
#include "test_support.hpp"
#include "vulrag/config.hpp"

using namespace vulrag;
using namespace vulrag::testing;

TEST_CASE("defaults") {
    auto cfg = load_config(std::nullopt, {}, json::object());
    CHECK(cfg.model == "gpt-3.5-turbo-0125");
    CHECK(cfg.temperature == 0.0);
    CHECK(cfg.n == 10);
    CHECK(cfg.final_k == 10);
    CHECK(cfg.k == doctest::Approx(1.2));
    CHECK(cfg.b == doctest::Approx(0.75));
    CHECK(cfg.token_limit == 16384);
    CHECK(cfg.retries == 3);
    CHECK(cfg.strategy == "vul-rag");
    CHECK(cfg.stratified);
}

TEST_CASE("precedence: flags beat env beat file beat defaults") {
    auto path = std::filesystem::temp_directory_path() / "vulrag_test_config.json";
    {
        std::ofstream out(path);
        out << R"({"model": "file-model", "n": 5, "temperature": 0.3})";
    }
    std::map<std::string, std::string> env{{"model", "env-model"}, {"seed", "42"}};
    json flags{{"model", "flag-model"}};

    auto cfg = load_config(path, env, flags);
    CHECK(cfg.model == "flag-model");  // flag wins over env and file
    CHECK(cfg.seed == 42);             // env wins over defaults
    CHECK(cfg.n == 5);                 // file wins over defaults
    CHECK(cfg.temperature == doctest::Approx(0.3));
    CHECK(cfg.final_k == 10);          // untouched default
    std::filesystem::remove(path);
}

TEST_CASE("unknown key names the nearest valid key") {
    try {
        load_config(std::nullopt, {}, json{{"nn", 3}});
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(contains(e.what(), "nn"));
        CHECK(contains(e.what(), "n"));
    }
    try {
        load_config(std::nullopt, {}, json{{"temprature", 0.5}});
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(contains(e.what(), "temperature"));
    }
}

TEST_CASE("string coercion and bad values") {
    auto cfg = load_config(std::nullopt, {{"n", "7"}, {"stratified", "false"}},
                           json::object());
    CHECK(cfg.n == 7);
    CHECK(!cfg.stratified);
    CHECK_THROWS_AS(
        load_config(std::nullopt, {{"n", "not-a-number"}}, json::object()),
        ConfigError);
}

TEST_CASE("config json embeds no secrets") {
    auto cfg = load_config(std::nullopt, {}, json::object());
    auto j = cfg.to_json();
    CHECK(j.contains("model"));
    // the env var *name* may appear; a key value never does
    CHECK(!j.contains("api_key"));
}

TEST_CASE("timestamp override makes artifacts reproducible") {
    auto cfg = load_config(std::nullopt, {{"timestamp", "2024-01-01T00:00:00Z"}},
                           json::object());
    CHECK(cfg.resolve_timestamp() == "2024-01-01T00:00:00Z");

    auto live = load_config(std::nullopt, {}, json::object());
    CHECK(!live.resolve_timestamp().empty());
}

TEST_CASE("process env reader strips the prefix and skips secrets") {
    setenv("VULRAG_MODEL", "env-model", 1);
    setenv("VULRAG_API_KEY", "secret-value", 1);
    setenv("VULRAG_UNRELATED", "x", 1);
    auto env = config_from_process_env();
    CHECK(env.at("model") == "env-model");
    CHECK(env.count("api_key") == 0);
    CHECK(env.count("unrelated") == 0);
    unsetenv("VULRAG_MODEL");
    unsetenv("VULRAG_API_KEY");
    unsetenv("VULRAG_UNRELATED");
}
