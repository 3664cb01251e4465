#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "fibertrack/common.hpp"
#include "fibertrack/image.hpp"
#include "fibertrack/io.hpp"

using namespace fibertrack;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* name) {
  const fs::path dir = fs::temp_directory_path() / "fibertrack_io_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("detection file round-trip preserves exact values and field order") {
  const auto dir = temp_dir("dets");
  std::vector<std::vector<Detection>> dets(3);
  dets[0].push_back({0, {1.5, 2.25, 10.125, 20.0625}, 0.875});
  dets[2].push_back({2, {0.1, 0.2, 0.30000000000000004, 7.0}, 1.0});
  write_detections(dir / "d.txt", dets);

  // normative field order
  std::ifstream in(dir / "d.txt");
  std::string first;
  std::getline(in, first);
  CHECK(first == "0,1.5,2.25,10.125,20.0625,0.875");

  const auto back = read_detections(dir / "d.txt", 3);
  REQUIRE(back.size() == 3);
  REQUIRE(back[0].size() == 1);
  CHECK(back[1].empty());
  REQUIRE(back[2].size() == 1);
  CHECK(back[0][0].box.x1 == 1.5);
  CHECK(back[2][0].box.x2 == 0.30000000000000004);  // shortest-round-trip formatting is exact
  CHECK(back[2][0].frame == 2);
}

TEST_CASE("track file round-trip with leading track_id field") {
  const auto dir = temp_dir("tracks");
  std::vector<TrackRecord> recs = {{7, 0, {1, 2, 3, 4}, 1.0}, {7, 1, {1.5, 2.5, 3.5, 4.5}, 0.0}};
  write_tracks(dir / "t.txt", recs);

  std::ifstream in(dir / "t.txt");
  std::string first;
  std::getline(in, first);
  CHECK(first == "7,0,1,2,3,4,1");

  const auto back = read_tracks(dir / "t.txt");
  REQUIRE(back.size() == 2);
  CHECK(back[0].track_id == 7);
  CHECK(back[1].score == 0.0);
  CHECK(back[1].box.y1 == 2.5);
}

TEST_CASE("parse errors carry file and line number") {
  const auto dir = temp_dir("bad");
  {
    std::ofstream out(dir / "bad.txt");
    out << "0,1,2,3,4,0.5\n";
    out << "0,1,2,nonsense,4,0.5\n";
  }
  try {
    read_detections(dir / "bad.txt");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(":2") != std::string::npos);
    CHECK(msg.find("nonsense") != std::string::npos);
  }

  {
    std::ofstream out(dir / "short.txt");
    out << "0,1,2,3\n";
  }
  CHECK_THROWS_AS(read_detections(dir / "short.txt"), DataError);
  CHECK_THROWS_AS(read_detections(dir / "missing.txt"), DataError);
}

TEST_CASE("pgm round-trip is bit exact") {
  const auto dir = temp_dir("pgm");
  Image img(17, 9);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 17; ++x) img.at(x, y) = static_cast<uint8_t>((x * 31 + y * 7) & 0xff);
  write_pgm(dir / "a.pgm", img);
  const Image back = read_pgm(dir / "a.pgm");
  CHECK(back == img);

  // identical images produce identical bytes
  write_pgm(dir / "b.pgm", img);
  std::ifstream fa(dir / "a.pgm", std::ios::binary), fb(dir / "b.pgm", std::ios::binary);
  const std::string ca((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  const std::string cb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  CHECK(ca == cb);
}
