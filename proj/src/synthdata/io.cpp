#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "dpn/error.hpp"
#include "dpn/records.hpp"
#include "dpn/synthdata.hpp"

namespace dpn {

using nlohmann::json;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

void append_array(std::string& out, const double* values, std::size_t n) {
  out += '[';
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ',';
    out += format_double(values[i]);
  }
  out += ']';
}

void append_points(std::string& out, const std::vector<Vec3>& pts) {
  std::vector<double> flat;
  flat.reserve(pts.size() * 3);
  for (const auto& p : pts) flat.insert(flat.end(), {p.x(), p.y(), p.z()});
  append_array(out, flat.data(), flat.size());
}

void append_pose(std::string& out, const Pose& pose) {
  double R[9];
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) R[i * 3 + j] = pose.R(i, j);
  }
  out += "{\"R\":";
  append_array(out, R, 9);
  out += ",\"t\":";
  append_array(out, pose.t.data(), 3);
  out += ",\"s\":";
  append_array(out, pose.s.data(), 3);
  out += '}';
}

void append_header(std::string& out, const Crop& crop, const SymmetrySpec& sym) {
  out += "{\"category\":" + json(crop.category).dump();
  out += ",\"instance\":" + std::to_string(crop.instance);
  out += ",\"symmetry\":";
  if (sym.is_axial()) {
    out += "{\"kind\":\"axial\",\"axis\":";
    append_array(out, sym.axis.data(), 3);
    out += '}';
  } else {
    out += "{\"kind\":\"none\"}";
  }
}

void append_body(std::string& out, const Crop& crop) {
  out += ",\"points\":";
  append_points(out, crop.points);
  out += ",\"colors\":";
  append_points(out, crop.colors);
  out += '}';
}

std::vector<double> numbers(const json& j, std::size_t expected, const char* field) {
  if (!j.is_array()) throw std::runtime_error(std::string(field) + " is not an array");
  auto v = j.get<std::vector<double>>();
  if (expected && v.size() != expected) throw std::runtime_error(std::string(field) + " has wrong length");
  return v;
}

Pose parse_pose(const json& j) {
  const auto R = numbers(j.at("R"), 9, "R");
  const auto t = numbers(j.at("t"), 3, "t");
  const auto s = numbers(j.at("s"), 3, "s");
  Pose pose;
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) pose.R(i, k) = R[i * 3 + k];
    pose.t[i] = t[i];
    pose.s[i] = s[i];
  }
  return pose;
}

std::vector<Vec3> parse_points(const json& j, const char* field) {
  const auto flat = numbers(j, 0, field);
  if (flat.size() % 3) throw std::runtime_error(std::string(field) + " length not a multiple of 3");
  std::vector<Vec3> out(flat.size() / 3);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = Vec3(flat[3 * i], flat[3 * i + 1], flat[3 * i + 2]);
  return out;
}

void parse_header(const json& j, Crop& crop, SymmetrySpec& sym) {
  crop.category = j.at("category").get<std::string>();
  crop.instance = j.at("instance").get<int>();
  const auto& s = j.at("symmetry");
  const auto kind = s.at("kind").get<std::string>();
  if (kind == "axial") {
    const auto a = numbers(s.at("axis"), 3, "axis");
    sym = SymmetrySpec::axial(Vec3(a[0], a[1], a[2]));
  } else if (kind == "none") {
    sym = SymmetrySpec::none();
  } else {
    throw std::runtime_error("unknown symmetry kind '" + kind + "'");
  }
  crop.points = parse_points(j.at("points"), "points");
  crop.colors = parse_points(j.at("colors"), "colors");
  if (crop.colors.size() != crop.points.size()) throw std::runtime_error("points and colors differ in length");
  for (const auto& c : crop.colors) {
    if (c.minCoeff() < 0.0 || c.maxCoeff() > 1.0) throw std::runtime_error("color outside [0,1]");
  }
}

// Splits into lines, requiring a newline terminator on every record so that a
// truncated final record is reported rather than silently dropped.
template <typename Fn>
void for_each_record(const std::string& text, Fn&& fn) {
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < text.size()) {
    ++line_no;
    const auto nl = text.find('\n', pos);
    if (nl == std::string::npos) {
      throw Error(ErrorCode::kParseError, "line " + std::to_string(line_no) + ": truncated record (no newline)");
    }
    const std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(json::parse(line));
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kParseError, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_lines(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << text;
}

}  // namespace

std::string dataset_line(const RenderedCrop& record) {
  std::string out;
  append_header(out, record.crop, record.annotation.symmetry);
  out += ",\"pose\":";
  append_pose(out, record.annotation.pose);
  append_body(out, record.crop);
  return out;
}

void write_dataset(const std::filesystem::path& path, const std::vector<RenderedCrop>& records) {
  std::string text;
  for (const auto& r : records) text += dataset_line(r) + "\n";
  write_lines(path, text);
}

std::vector<RenderedCrop> parse_dataset(const std::string& text) {
  std::vector<RenderedCrop> out;
  for_each_record(text, [&](const json& j) {
    RenderedCrop r;
    parse_header(j, r.crop, r.annotation.symmetry);
    r.annotation.pose = parse_pose(j.at("pose"));
    out.push_back(std::move(r));
  });
  return out;
}

std::vector<RenderedCrop> read_dataset(const std::filesystem::path& path) { return parse_dataset(slurp(path)); }

std::string prediction_line(const PredictionRecord& record) {
  std::string out;
  append_header(out, record.crop, record.symmetry);
  out += ",\"pred_pose\":";
  append_pose(out, record.pred);
  out += ",\"confidence\":" + format_double(record.confidence);
  if (record.refine_iters) out += ",\"refine_iters\":" + std::to_string(*record.refine_iters);
  if (record.refine_loss) out += ",\"refine_loss\":" + format_double(*record.refine_loss);
  if (!record.refine_trace.empty()) {
    out += ",\"refine_trace\":";
    append_array(out, record.refine_trace.data(), record.refine_trace.size());
  }
  append_body(out, record.crop);
  return out;
}

void write_predictions(const std::filesystem::path& path, const std::vector<PredictionRecord>& records) {
  std::string text;
  for (const auto& r : records) text += prediction_line(r) + "\n";
  write_lines(path, text);
}

std::vector<PredictionRecord> parse_predictions(const std::string& text) {
  std::vector<PredictionRecord> out;
  for_each_record(text, [&](const json& j) {
    PredictionRecord r;
    parse_header(j, r.crop, r.symmetry);
    r.pred = parse_pose(j.contains("pred_pose") ? j.at("pred_pose") : j.at("pose"));
    if (j.contains("confidence")) r.confidence = j.at("confidence").get<double>();
    if (r.confidence < 0.0 || r.confidence > 1.0) throw std::runtime_error("confidence outside [0,1]");
    if (j.contains("refine_iters")) r.refine_iters = j.at("refine_iters").get<int>();
    if (j.contains("refine_loss")) r.refine_loss = j.at("refine_loss").get<double>();
    if (j.contains("refine_trace")) r.refine_trace = numbers(j.at("refine_trace"), 0, "refine_trace");
    out.push_back(std::move(r));
  });
  return out;
}

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path) {
  return parse_predictions(slurp(path));
}

}  // namespace dpn
