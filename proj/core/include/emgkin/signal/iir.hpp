#pragma once

#include <Eigen/Core>

#include <span>
#include <vector>

namespace emgkin::signal {

// One biquad in direct form II transposed, normalized so that a0 == 1.
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0;
  double a1 = 0, a2 = 0;
};

// Cascade of second-order sections. Immutable once designed; filtering never
// touches the design, so one cascade can be shared across threads.
class SosCascade {
 public:
  SosCascade() = default;
  explicit SosCascade(std::vector<Biquad> sections) : sections_(std::move(sections)) {}

  const std::vector<Biquad>& sections() const { return sections_; }
  bool empty() const { return sections_.empty(); }

  // Nominal order (number of poles).
  int order() const;

  // Largest pole magnitude across sections; governs transient length.
  double max_pole_radius() const;

  // Complex frequency response magnitude at f (Hz).
  double magnitude(double f_hz, double fs) const;

  // Group delay in samples at f, by numerical differentiation of the phase.
  double group_delay(double f_hz, double fs) const;

  // Single causal pass from zero state.
  void filter_inplace(std::span<double> x) const;

  // Forward-backward pass with odd-reflection padding and steady-state
  // initial conditions. Zero phase, squared magnitude response.
  void filtfilt_inplace(std::span<double> x) const;

  // Padding used by filtfilt for a signal of length n.
  std::size_t pad_length(std::size_t n) const;

 private:
  void run(std::span<double> x, double x0) const;

  std::vector<Biquad> sections_;
};

// Digital Butterworth designs via analog prototype + bilinear transform with
// frequency prewarping. `order` is the prototype order; the band-pass has
// 2*order poles.
SosCascade butter_lowpass(int order, double cutoff_hz, double fs);
SosCascade butter_highpass(int order, double cutoff_hz, double fs);
SosCascade butter_bandpass(int order, double low_hz, double high_hz, double fs);

// Second-order IIR notch with the given quality factor.
SosCascade iir_notch(double f0_hz, double quality, double fs);

// Concatenates two cascades into one (applied left first).
SosCascade chain(const SosCascade& first, const SosCascade& second);

}  // namespace emgkin::signal
