#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mana/tensor.hpp"

namespace mana {

inline constexpr double kPsnrCap = 100.0;

/// 10 log10(max_val^2 / MSE) over every value; identical inputs report kPsnrCap.
double psnr(const Tensor<float>& a, const Tensor<float>& b, double max_val = 1.0);

/// Mean local SSIM of C x H x W images (11x11 Gaussian window, sigma 1.5,
/// K1 = 0.01, K2 = 0.03, range 1), valid window positions only, averaged
/// over channels. Both spatial extents must be at least 11.
double ssim(const Tensor<float>& a, const Tensor<float>& b);

struct MetricRow {
    std::string clip;
    std::string method;
    double psnr_db = 0;
    double ssim = 0;
};

/// Per-method mean of the given rows, labelled clip = "mean", in the order
/// methods first appear.
std::vector<MetricRow> aggregate_rows(const std::vector<MetricRow>& rows);

/// CSV with header clip,method,psnr_db,ssim.
std::string metrics_csv(const std::vector<MetricRow>& rows);
void write_text_file(const std::filesystem::path& path, const std::string& text);

} // namespace mana
