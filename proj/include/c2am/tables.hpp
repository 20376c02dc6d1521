#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "c2am/metrics.hpp"
#include "c2am/postprocess.hpp"

namespace c2am {

// Box CSV: header `image_id,xmin,ymin,xmax,ymax`, LF line endings.
void write_box_csv(const std::filesystem::path& path, std::span<const BoxRow> rows);
// Rows in file order (an image may appear more than once).
std::vector<BoxRow> read_box_rows(const std::filesystem::path& path);
GtBoxTable read_gt_boxes(const std::filesystem::path& path);
// Throws FormatError on duplicate image ids.
PredBoxTable read_pred_boxes(const std::filesystem::path& path);

// `image_id,class_id`.
ClassTable read_class_table(const std::filesystem::path& path);
// `image_id,class_rank_1,...,class_rank_5` (fewer ranks allowed).
RankedClassTable read_ranked_classes(const std::filesystem::path& path);
void write_ranked_classes(const std::filesystem::path& path, const RankedClassTable& table);

void write_lines(const std::filesystem::path& path, std::span<const std::string> lines);

}  // namespace c2am
