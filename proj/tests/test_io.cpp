#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tsrisk/error.hpp"
#include "tsrisk/io.hpp"

using namespace tsrisk;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("tsrisk_io_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("atomic write creates, replaces and leaves no temporary") {
  const auto dir = scratch("write");
  const auto file = dir / "nested" / "out.csv";
  atomic_write(file, "a,b\n1,2\n");
  CHECK(slurp(file) == "a,b\n1,2\n");
  atomic_write(file, "x\n");
  CHECK(slurp(file) == "x\n");
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(file.parent_path())) ++entries;
  CHECK(entries == 1);
  fs::remove_all(dir);
}

TEST_CASE("atomic write into an unwritable location fails cleanly") {
  const auto dir = scratch("blocked");
  fs::create_directories(dir / "target");
  // The destination is an existing non-empty directory, so the rename cannot succeed.
  atomic_write(dir / "target" / "keep", "k");
  CHECK_THROWS_AS(atomic_write(dir / "target", "data"), ConfigError);
  CHECK_FALSE(fs::exists(dir / "target.tmp"));
  fs::remove_all(dir);
}

TEST_CASE("content hash is 64-bit FNV-1a") {
  CHECK(content_hash("") == "cbf29ce484222325");
  CHECK(content_hash("a") == "af63dc4c8601ec8c");
  CHECK(content_hash("foobar") == "85944171f73967e8");
  CHECK(content_hash("{\"n\": 1}") != content_hash("{\"n\": 2}"));
}

TEST_CASE("manifest lists the run") {
  const auto dir = scratch("manifest");
  RunManifest m;
  m.command = "mc";
  m.config_hash = content_hash("cfg");
  m.seed = 42;
  m.files = {"samples.csv", "summary.json"};
  write_manifest(dir, m);
  const auto j = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(j["command"] == "mc");
  CHECK(j["seed"] == 42);
  CHECK(j["config_hash"] == m.config_hash);
  CHECK(j["files"].size() == 2);
  fs::remove_all(dir);
}
