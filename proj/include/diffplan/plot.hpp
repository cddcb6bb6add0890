#pragma once

#include <string>

namespace diffplan {

// All plot commands render deterministic standalone SVG: same inputs,
// byte-identical output. Files are written only after the full document
// has been assembled.

// Denoising-progress panels from a snapshots CSV (columns: i, t, dims...).
// One panel per diffusion-step block present in the file.
std::string render_denoising_svg(const std::string& snapshots_csv, const std::string& env_name);

// Plan path over the maze walls from a plan CSV (columns: t, dims...).
std::string render_maze_svg(const std::string& plan_csv, const std::string& env_name);

// Score-vs-warm-start-budget curve from a sweep summary CSV
// (columns: k, episodes, mean_return, stderr, success_rate).
std::string render_sweep_svg(const std::string& sweep_csv);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace diffplan
