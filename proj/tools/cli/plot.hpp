#pragma once

#include "semcom/metrics.hpp"

#include <istream>
#include <string>
#include <vector>

namespace semcom::cli {

struct ResultsTable {
  std::vector<std::string> class_names;
  std::vector<ResultRow> rows;
};

ResultsTable read_results_csv(std::istream& in);

// mIoU versus SNR, one polyline per (scheme, velocity, R) series.
std::string render_miou_svg(const std::vector<ResultRow>& rows, const std::string& title);

}  // namespace semcom::cli
