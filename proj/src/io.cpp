#include "fibertrack/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "fibertrack/common.hpp"

namespace fibertrack {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const std::filesystem::path& path, int line_no) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end)
    throw DataError(path.string() + ":" + std::to_string(line_no) + ": bad number '" + s + "'");
  return v;
}

int parse_int(const std::string& s, const std::filesystem::path& path, int line_no) {
  int v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw DataError(path.string() + ":" + std::to_string(line_no) + ": bad integer '" + s + "'");
  return v;
}

}  // namespace

void write_detections(const std::filesystem::path& path,
                      const std::vector<std::vector<Detection>>& per_frame) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  for (const auto& frame : per_frame) {
    for (const auto& d : frame) {
      out << d.frame << ',' << format_double(d.box.x1) << ',' << format_double(d.box.y1) << ','
          << format_double(d.box.x2) << ',' << format_double(d.box.y2) << ','
          << format_double(d.score) << '\n';
    }
  }
  if (!out) throw DataError("write failed: " + path.string());
}

std::vector<std::vector<Detection>> read_detections(const std::filesystem::path& path,
                                                    int num_frames) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path.string());
  std::vector<Detection> all;
  std::string line;
  int line_no = 0;
  int max_frame = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 6)
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": expected 6 fields, got " + std::to_string(fields.size()));
    Detection d;
    d.frame = parse_int(fields[0], path, line_no);
    d.box = {parse_double(fields[1], path, line_no), parse_double(fields[2], path, line_no),
             parse_double(fields[3], path, line_no), parse_double(fields[4], path, line_no)};
    d.score = parse_double(fields[5], path, line_no);
    if (d.frame < 0)
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": negative frame index");
    max_frame = std::max(max_frame, d.frame);
    all.push_back(d);
  }
  const int frames = num_frames > 0 ? num_frames : max_frame + 1;
  if (max_frame >= frames)
    throw DataError(path.string() + ": frame index " + std::to_string(max_frame) +
                    " out of range (frames=" + std::to_string(frames) + ")");
  std::vector<std::vector<Detection>> per_frame(static_cast<std::size_t>(std::max(frames, 0)));
  for (const auto& d : all) per_frame[static_cast<std::size_t>(d.frame)].push_back(d);
  return per_frame;
}

void write_tracks(const std::filesystem::path& path, const std::vector<TrackRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  for (const auto& r : records) {
    out << r.track_id << ',' << r.frame << ',' << format_double(r.box.x1) << ','
        << format_double(r.box.y1) << ',' << format_double(r.box.x2) << ','
        << format_double(r.box.y2) << ',' << format_double(r.score) << '\n';
  }
  if (!out) throw DataError("write failed: " + path.string());
}

std::vector<TrackRecord> read_tracks(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path.string());
  std::vector<TrackRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 7)
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": expected 7 fields, got " + std::to_string(fields.size()));
    TrackRecord r;
    r.track_id = parse_int(fields[0], path, line_no);
    r.frame = parse_int(fields[1], path, line_no);
    r.box = {parse_double(fields[2], path, line_no), parse_double(fields[3], path, line_no),
             parse_double(fields[4], path, line_no), parse_double(fields[5], path, line_no)};
    r.score = parse_double(fields[6], path, line_no);
    if (r.frame < 0)
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": negative frame index");
    records.push_back(r);
  }
  return records;
}

std::vector<std::vector<Detection>> boxes_to_detections(const PseudoGT& boxes, double score) {
  std::vector<std::vector<Detection>> out(boxes.size());
  for (std::size_t f = 0; f < boxes.size(); ++f) {
    out[f].reserve(boxes[f].size());
    for (const auto& b : boxes[f]) out[f].push_back({static_cast<int>(f), b, score});
  }
  return out;
}

PseudoGT detections_to_boxes(const std::vector<std::vector<Detection>>& dets) {
  PseudoGT out(dets.size());
  for (std::size_t f = 0; f < dets.size(); ++f) {
    out[f].reserve(dets[f].size());
    for (const auto& d : dets[f]) out[f].push_back(d.box);
  }
  return out;
}

}  // namespace fibertrack
