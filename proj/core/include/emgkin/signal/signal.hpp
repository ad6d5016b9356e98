#pragma once

#include "emgkin/signal/iir.hpp"
#include "emgkin/types.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <optional>
#include <vector>

namespace emgkin::signal {

inline constexpr int kBandpassOrder = 4;
inline constexpr double kNotchQuality = 30.0;

enum class Phase { kZero, kCausal };

// Throws kInvalidBand unless 0 < low < high < fs/2.
void check_band(const BandSpec& band, double fs);

SosCascade design_bandpass(const BandSpec& band, double fs);

// 4th-order Butterworth band-pass. Zero-phase runs forward-backward; causal
// is a single pass whose delay is reported by bandpass_group_delay().
EmgRecording bandpass(const EmgRecording& rec, const BandSpec& band, Phase phase = Phase::kZero);

// Group delay (samples) of the causal band-pass at the band's geometric centre.
double bandpass_group_delay(const BandSpec& band, double fs);

// Cascaded Q=30 notches, one per frequency.
EmgRecording notch(const EmgRecording& rec, const std::vector<double>& freqs_hz,
                   Phase phase = Phase::kZero);

// Applies `cascade` to every row of `m`.
void apply_rows(Eigen::MatrixXd& m, const SosCascade& cascade, Phase phase);

// Zero-phase Butterworth low-pass of a single series.
Eigen::VectorXd lowpass(const Eigen::VectorXd& x, double cutoff_hz, double fs, int order = 4);

// Linear interpolation onto a uniform grid at target_fs spanning the same
// duration. Equal rates return the input unchanged.
KinematicsTrack resample_linear(const KinematicsTrack& track, double target_fs);

// Subtracts the instantaneous cross-channel mean. Visualisation only.
EmgRecording common_average_reference(const EmgRecording& rec);

struct ChannelStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;  // population (1/N); degenerate channels hold 1
};

struct Standardized {
  EmgRecording rec;
  ChannelStats stats;
};

Standardized standardize_per_channel(const EmgRecording& rec,
                                     const std::optional<ChannelStats>& stats = std::nullopt);

// Magnitude of the FFT analytic signal, per channel.
EmgRecording hilbert_envelope(const EmgRecording& rec);
Eigen::VectorXd hilbert_envelope(const Eigen::VectorXd& x);

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive

  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

// Converts milliseconds to a sample count on the grid of fs (rounded).
std::size_t ms_to_samples(double ms, double fs);

// Windows of length_ms every step_ms; empty when the window exceeds the signal.
std::vector<IndexRange> sliding_windows(double length_ms, double step_ms, std::size_t n_samples,
                                        double fs);

}  // namespace emgkin::signal
