#pragma once

// Reference numbers reported for the original full-scale system. Desk runs
// reproduce directions and trends, not these magnitudes.
namespace outfit::published {

inline constexpr int kPolyvoreOutfits = 68306;

inline constexpr double kCatAuc = 0.928;   // Polyvore, concatenated features
inline constexpr double kCatFitb = 66.1;   // percent

struct CoherenceRow {
  double margin;
  double s_b;
  double s_c;
  double rho;
  double r2;
};

inline constexpr CoherenceRow kCoherence[] = {
    {0.3, 2.35, 2.07, 0.34, 0.14},
    {1.0, 5.70, 4.93, 0.42, 0.17},
    {3.0, 16.84, 13.31, 0.49, 0.28},
};

}  // namespace outfit::published
