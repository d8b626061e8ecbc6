#pragma once

#include "bilip/metric.hpp"

#include <filesystem>

namespace bilip {

/// Row-major symmetric distance matrix in CSV; a non-numeric first row is
/// treated as a header.
MatrixMetric read_distance_csv(const std::filesystem::path& path);

/// Little-endian uint64 point count n followed by n*n float64 entries, row-major.
MatrixMetric read_distance_binary(const std::filesystem::path& path);
void write_distance_binary(const std::filesystem::path& path, const Eigen::MatrixXd& d);

/// Undirected weighted edge list "u v w" (0-based ids, '#' comments).
/// Distances are shortest-path lengths; the graph must be connected.
MatrixMetric read_edge_list(const std::filesystem::path& path);
Eigen::MatrixXd shortest_paths(std::size_t n,
                               const std::vector<std::tuple<std::size_t, std::size_t, double>>& edges);

}  // namespace bilip
