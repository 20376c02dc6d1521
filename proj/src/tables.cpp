#include "c2am/tables.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "c2am/errors.hpp"

namespace c2am {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

int to_int(const std::string& s, const std::filesystem::path& path, int lineno) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected an integer, got '" + s + "'");
  }
  return v;
}

// Calls fn(fields, lineno) for every data row after checking the header prefix.
template <typename Fn>
void for_each_row(const std::filesystem::path& path, const std::string& header_prefix, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  int lineno = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      if (line.rfind(header_prefix, 0) != 0) {
        throw FormatError(path.string() + ": expected header starting with '" + header_prefix + "'");
      }
      header = false;
      continue;
    }
    fn(split_fields(line), lineno);
  }
  if (header) throw FormatError(path.string() + ": missing header");
}

}  // namespace

void write_box_csv(const std::filesystem::path& path, std::span<const BoxRow> rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "image_id,xmin,ymin,xmax,ymax\n";
  for (const auto& row : rows) {
    out << row.image_id << "," << row.box.xmin << "," << row.box.ymin << "," << row.box.xmax << ","
        << row.box.ymax << "\n";
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<BoxRow> read_box_rows(const std::filesystem::path& path) {
  std::vector<BoxRow> rows;
  for_each_row(path, "image_id,xmin,ymin,xmax,ymax", [&](const std::vector<std::string>& f, int lineno) {
    if (f.size() != 5) throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 5 fields");
    BoxRow row{f[0], {to_int(f[1], path, lineno), to_int(f[2], path, lineno), to_int(f[3], path, lineno),
                      to_int(f[4], path, lineno)}};
    if (row.box.xmax < row.box.xmin || row.box.ymax < row.box.ymin || row.box.xmin < 0 || row.box.ymin < 0) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": invalid box");
    }
    rows.push_back(std::move(row));
  });
  return rows;
}

GtBoxTable read_gt_boxes(const std::filesystem::path& path) {
  GtBoxTable table;
  for (auto& row : read_box_rows(path)) table[row.image_id].push_back(row.box);
  return table;
}

PredBoxTable read_pred_boxes(const std::filesystem::path& path) {
  PredBoxTable table;
  for (auto& row : read_box_rows(path)) {
    if (!table.emplace(row.image_id, row.box).second) {
      throw FormatError(path.string() + ": more than one predicted box for '" + row.image_id + "'");
    }
  }
  return table;
}

ClassTable read_class_table(const std::filesystem::path& path) {
  ClassTable table;
  for_each_row(path, "image_id,class_id", [&](const std::vector<std::string>& f, int lineno) {
    if (f.size() != 2) throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 2 fields");
    table[f[0]] = to_int(f[1], path, lineno);
  });
  return table;
}

RankedClassTable read_ranked_classes(const std::filesystem::path& path) {
  RankedClassTable table;
  for_each_row(path, "image_id,class_rank_1", [&](const std::vector<std::string>& f, int lineno) {
    if (f.size() < 2) throw FormatError(path.string() + ":" + std::to_string(lineno) + ": no class ranks");
    std::vector<int> ranks;
    for (std::size_t i = 1; i < f.size(); ++i) ranks.push_back(to_int(f[i], path, lineno));
    table[f[0]] = std::move(ranks);
  });
  return table;
}

void write_ranked_classes(const std::filesystem::path& path, const RankedClassTable& table) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "image_id,class_rank_1,class_rank_2,class_rank_3,class_rank_4,class_rank_5\n";
  for (const auto& [id, ranks] : table) {
    out << id;
    for (int r : ranks) out << "," << r;
    out << "\n";
  }
}

void write_lines(const std::filesystem::path& path, std::span<const std::string> lines) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& line : lines) out << line << "\n";
}

}  // namespace c2am
