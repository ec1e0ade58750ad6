#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "logagg/datamodel.hpp"
#include "logagg/error.hpp"

namespace logagg {

struct CsvOptions {
  std::string label_column = "y";
  // Without a header the label column is the 0-based index in label_column,
  // or the last column when label_column is not an integer.
  bool has_header = true;
};

namespace csv_detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

inline std::optional<double> parse_double(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

inline bool skip_line(std::string_view line) {
  const std::string_view t = trim(line);
  return t.empty() || t.front() == '#';
}

}  // namespace csv_detail

/// 17 significant digits: enough for a lossless double round trip.
inline std::string format_real(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

/// Reads a comma-separated file with one header row. Lines starting with '#'
/// are comments. Errors carry the file line number and column name.
inline Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options = {}) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open '" + path.string() + "'");

  const std::string where = path.string() + ":";
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  std::size_t label_col = 0;
  bool have_columns = false;
  std::vector<std::vector<double>> columns;
  std::vector<double> labels;

  auto setup_columns = [&](std::size_t width) {
    if (width < 2) throw validation_error(where + std::to_string(line_no) + ": need a label column and at least one feature");
    columns.assign(width - 1, {});
    have_columns = true;
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (csv_detail::skip_line(line)) continue;
    const auto fields = csv_detail::split_fields(line);

    if (!have_columns) {
      if (options.has_header) {
        for (auto f : fields) header.emplace_back(f);
        std::optional<std::size_t> found;
        for (std::size_t c = 0; c < header.size(); ++c) {
          if (header[c] == options.label_column) {
            if (found)
              throw validation_error(where + std::to_string(line_no) + ": label column '" +
                                     options.label_column + "' appears more than once");
            found = c;
          }
        }
        if (!found)
          throw validation_error(where + std::to_string(line_no) + ": label column '" + options.label_column +
                                 "' not found in header");
        label_col = *found;
        setup_columns(header.size());
        continue;
      }
      const auto idx = csv_detail::parse_double(options.label_column);
      if (idx && *idx >= 0 && *idx == std::floor(*idx)) {
        label_col = static_cast<std::size_t>(*idx);
        if (label_col >= fields.size())
          throw validation_error(where + std::to_string(line_no) + ": label column index " +
                                 options.label_column + " beyond " + std::to_string(fields.size()) + " columns");
      } else {
        label_col = fields.size() - 1;
      }
      for (std::size_t c = 0; c < fields.size(); ++c) header.push_back("col" + std::to_string(c));
      setup_columns(fields.size());
    }

    if (fields.size() != header.size())
      throw validation_error(where + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                             " fields, found " + std::to_string(fields.size()));
    std::size_t feature = 0;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const auto value = csv_detail::parse_double(fields[c]);
      if (!value || !std::isfinite(*value))
        throw validation_error(where + std::to_string(line_no) + ", column '" + header[c] +
                               "': non-numeric value '" + std::string(fields[c]) + "'");
      if (c == label_col) {
        if (*value != 0.0 && *value != 1.0)
          throw validation_error(where + std::to_string(line_no) + ", column '" + header[c] + "': label value '" +
                                 std::string(fields[c]) + "' is not 0 or 1");
        labels.push_back(*value);
      } else {
        columns[feature++].push_back(*value);
      }
    }
  }

  if (!have_columns) throw validation_error(where + " file is empty");
  if (labels.empty()) throw validation_error(where + " file has a header but no data rows");

  const auto n = static_cast<Eigen::Index>(labels.size());
  const auto p = static_cast<Eigen::Index>(columns.size());
  MatrixXd x(n, p);
  for (Eigen::Index j = 0; j < p; ++j)
    x.col(j) = Eigen::Map<const VectorXd>(columns[static_cast<std::size_t>(j)].data(), n);
  VectorXd y = Eigen::Map<const VectorXd>(labels.data(), n);

  std::vector<std::string> names;
  if (options.has_header) {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (c != label_col) names.push_back(header[c]);
  } else {
    names = default_feature_names(static_cast<std::size_t>(p));
  }
  return Dataset(std::move(x), std::move(y), std::move(names));
}

/// Writes features in column order followed by the label column. Each entry of
/// `comments` becomes a leading "# ..." line.
inline void write_csv(const std::filesystem::path& path, const Dataset& dataset,
                      const std::vector<std::string>& comments = {}, const std::string& label_column = "y") {
  std::ofstream out(path);
  if (!out) throw validation_error("cannot write '" + path.string() + "'");
  for (const auto& c : comments) out << "# " << c << '\n';
  for (const auto& name : dataset.feature_names()) out << name << ',';
  out << label_column << '\n';
  const auto& x = dataset.x();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) out << format_real(x(i, j)) << ',';
    out << (dataset.y()[i] == 1.0 ? '1' : '0') << '\n';
  }
  if (!out) throw validation_error("write to '" + path.string() + "' failed");
}

}  // namespace logagg
