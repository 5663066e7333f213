#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "covshift/types.hpp"

namespace covshift {

/// Reads a dataset CSV: header row, feature columns x1..xp and an optional
/// label column y (any position). Throws on malformed rows.
Dataset read_dataset_csv(const std::filesystem::path& path, Role role = Role::Train);

/// Writes x1..xp and, when labels are present, y. Values use %.17g so a
/// round trip is exact.
void write_dataset_csv(const std::filesystem::path& path, const Dataset& d);

/// One column with the given header name.
void write_vector_csv(const std::filesystem::path& path, const Vector& v, const std::string& name);
Vector read_vector_csv(const std::filesystem::path& path);

/// Splits on commas and trims surrounding whitespace from each field.
std::vector<std::string> split_csv_line(const std::string& line);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

}  // namespace covshift
