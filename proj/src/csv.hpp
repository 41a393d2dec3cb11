#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace debacer::detail {

// RFC 4180 records: comma separated, double-quoted fields may contain
// commas, quotes ("") and newlines. Throws DataError("CsvSyntax").
std::vector<std::vector<std::string>> parse_csv(std::string_view content);

std::string csv_escape(std::string_view field);
std::string csv_row(const std::vector<std::string>& fields);

}  // namespace debacer::detail
