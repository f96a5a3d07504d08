#pragma once

#include <string>
#include <vector>

#include "tricl/mat.hpp"

namespace tricl {

enum class Alignment { Both, ContentToImage, ContentToText };

Alignment alignment_from_string(const std::string& s);
std::string alignment_to_string(Alignment a);

struct LossConfig {
    Alignment alignment = Alignment::Both;
    // The printed loss excludes the matching pair from the denominator; setting
    // this true switches to the standard form that keeps it.
    bool include_positive = false;
};

struct TemperaturePair {
    static constexpr double kMinTemp = 1e-3;
    static constexpr double kMaxTemp = 10.0;

    double log_ic = 0.0;
    double log_tc = 0.0;

    double temp_ic() const { return std::exp(log_ic); }
    double temp_tc() const { return std::exp(log_tc); }
    void clamp();
    static TemperaturePair from_temps(double ic, double tc);
};

// Entry (i, j) is the similarity of A_i with B_j (dot product; rows are
// expected unit-norm so this is the cosine).
Mat similarity_matrix(const std::vector<Vec>& a, const std::vector<Vec>& b);

// One row of the contrastive objective in log space: -s_ii + logsumexp over
// the denominator set, with s = sims/temp and max-subtraction for stability.
double contrastive_row_loss(int i, const Mat& sims, double temp, const LossConfig& cfg);

double image_content_loss_row(int i, const Mat& image_content_sims, double temp_ic,
                              const LossConfig& cfg);
double text_content_loss_row(int i, const Mat& text_content_sims, double temp_tc,
                             const LossConfig& cfg);

struct BatchTriplet {
    std::vector<Vec> images;
    std::vector<Vec> texts;
    std::vector<Vec> contents;

    int size() const { return static_cast<int>(images.size()); }
    void validate() const; // N >= 2, matching sizes, unit norms
};

struct LossResult {
    double total = 0.0;            // sum over the batch of (ic + tc) / 2
    double mean_per_triplet = 0.0; // total / N
    std::vector<double> image_content_rows;
    std::vector<double> text_content_rows;
    std::vector<Vec> d_images, d_texts, d_contents;
    double d_log_temp_ic = 0.0, d_log_temp_tc = 0.0;
};

LossResult batch_contrastive_loss(const BatchTriplet& batch, const TemperaturePair& temps,
                                  const LossConfig& cfg);

} // namespace tricl
