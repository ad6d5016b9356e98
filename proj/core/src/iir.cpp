#include "emgkin/signal/iir.hpp"

#include "emgkin/error.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

namespace emgkin::signal {

namespace {

using cd = std::complex<double>;
constexpr double kPi = std::numbers::pi;

// Left-half-plane poles of the unit-cutoff analog Butterworth prototype.
std::vector<cd> prototype_poles(int order) {
  std::vector<cd> poles;
  poles.reserve(static_cast<std::size_t>(order));
  for (int k = 0; k < order; ++k) {
    const double angle = kPi * (2.0 * k + order + 1) / (2.0 * order);
    poles.emplace_back(std::cos(angle), std::sin(angle));
  }
  return poles;
}

cd bilinear(cd s, double fs) { return (2.0 * fs + s) / (2.0 * fs - s); }

double prewarp(double f_hz, double fs) { return 2.0 * fs * std::tan(kPi * f_hz / fs); }

cd section_response(const Biquad& s, cd z_inv) {
  const cd num = s.b0 + z_inv * (s.b1 + z_inv * s.b2);
  const cd den = 1.0 + z_inv * (s.a1 + z_inv * s.a2);
  return num / den;
}

cd cascade_response(const std::vector<Biquad>& sections, double omega) {
  const cd z_inv = std::polar(1.0, -omega);
  cd h = 1.0;
  for (const auto& s : sections) h *= section_response(s, z_inv);
  return h;
}

// Denominator for a pole pair {z1, z2} (conjugates or two reals).
void set_denominator(Biquad& s, cd z1, cd z2) {
  s.a1 = -(z1 + z2).real();
  s.a2 = (z1 * z2).real();
}

void check_design(int order, double fs) {
  if (order < 1) throw Error(ErrorKind::kInvalidInput, "filter order must be >= 1");
  if (!(fs > 0.0)) throw Error(ErrorKind::kInvalidInput, "sampling rate must be positive");
}

void check_edge(double f_hz, double fs) {
  if (!(f_hz > 0.0) || !(f_hz < fs / 2.0)) {
    throw Error(ErrorKind::kInvalidBand, "frequency " + std::to_string(f_hz) +
                                             " Hz must lie strictly inside (0, " +
                                             std::to_string(fs / 2.0) + ") Hz");
  }
}

// Low/high-pass share the pole mapping; only the zeros and gain point differ.
SosCascade butter_lh(int order, double cutoff_hz, double fs, bool highpass) {
  check_design(order, fs);
  check_edge(cutoff_hz, fs);
  const double wc = prewarp(cutoff_hz, fs);
  std::vector<Biquad> sections;
  for (const cd& p : prototype_poles(order)) {
    if (p.imag() < -1e-12) continue;  // handled by its conjugate
    const cd s = highpass ? wc / p : wc * p;
    const cd z = bilinear(s, fs);
    Biquad sec;
    if (std::abs(p.imag()) <= 1e-12) {
      // first-order section
      sec.b0 = 1.0;
      sec.b1 = highpass ? -1.0 : 1.0;
      sec.b2 = 0.0;
      sec.a1 = -z.real();
      sec.a2 = 0.0;
    } else {
      sec.b0 = 1.0;
      sec.b1 = highpass ? -2.0 : 2.0;
      sec.b2 = 1.0;
      set_denominator(sec, z, std::conj(z));
    }
    // unit gain at DC (low-pass) or Nyquist (high-pass)
    const cd g = section_response(sec, highpass ? cd(-1.0) : cd(1.0));
    const double scale = 1.0 / std::abs(g);
    sec.b0 *= scale;
    sec.b1 *= scale;
    sec.b2 *= scale;
    sections.push_back(sec);
  }
  return SosCascade(std::move(sections));
}

}  // namespace

int SosCascade::order() const {
  int n = 0;
  for (const auto& s : sections_) n += (s.a2 != 0.0 || s.b2 != 0.0) ? 2 : 1;
  return n;
}

double SosCascade::max_pole_radius() const {
  double r = 0.0;
  for (const auto& s : sections_) {
    // roots of z^2 + a1 z + a2
    const cd disc = std::sqrt(cd(s.a1 * s.a1 - 4.0 * s.a2));
    r = std::max({r, std::abs((-s.a1 + disc) / 2.0), std::abs((-s.a1 - disc) / 2.0)});
  }
  return r;
}

double SosCascade::magnitude(double f_hz, double fs) const {
  return std::abs(cascade_response(sections_, 2.0 * kPi * f_hz / fs));
}

double SosCascade::group_delay(double f_hz, double fs) const {
  const double omega = 2.0 * kPi * f_hz / fs;
  const double h = 1e-6;
  const cd ratio = cascade_response(sections_, omega + h) / cascade_response(sections_, omega - h);
  return -std::arg(ratio) / (2.0 * h);
}

std::size_t SosCascade::pad_length(std::size_t n) const {
  if (n <= 1) return 0;
  std::size_t pad = 3 * static_cast<std::size_t>(std::max(order(), 1));
  const double r = max_pole_radius();
  if (r > 0.0 && r < 1.0) {
    // samples for the slowest mode to decay by 60 dB
    const double transient = std::ceil(std::log(1e-3) / std::log(r));
    pad = std::max(pad, static_cast<std::size_t>(transient));
  }
  return std::min(pad, n - 1);
}

void SosCascade::run(std::span<double> x, double x0) const {
  double scale = x0;
  for (const auto& s : sections_) {
    // steady-state state for a constant input of `scale`
    const double dc_den = 1.0 + s.a1 + s.a2;
    const double dc = std::abs(dc_den) > 1e-300 ? (s.b0 + s.b1 + s.b2) / dc_den : 0.0;
    double z2 = (s.b2 - s.a2 * dc) * scale;
    double z1 = (s.b1 - s.a1 * dc) * scale + z2;
    for (double& v : x) {
      const double in = v;
      const double y = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * y + z2;
      z2 = s.b2 * in - s.a2 * y;
      v = y;
    }
    scale *= dc;
  }
}

void SosCascade::filter_inplace(std::span<double> x) const { run(x, 0.0); }

void SosCascade::filtfilt_inplace(std::span<double> x) const {
  const std::size_t n = x.size();
  if (n == 0 || sections_.empty()) return;
  const std::size_t pad = pad_length(n);
  std::vector<double> ext(n + 2 * pad);
  const double first = x[0];
  const double last = x[n - 1];
  for (std::size_t i = 0; i < pad; ++i) {
    ext[i] = 2.0 * first - x[pad - i];
    ext[pad + n + i] = 2.0 * last - x[n - 2 - i];
  }
  std::copy(x.begin(), x.end(), ext.begin() + static_cast<std::ptrdiff_t>(pad));

  run(ext, ext.front());
  std::reverse(ext.begin(), ext.end());
  run(ext, ext.front());
  std::reverse(ext.begin(), ext.end());

  std::copy(ext.begin() + static_cast<std::ptrdiff_t>(pad),
            ext.begin() + static_cast<std::ptrdiff_t>(pad + n), x.begin());
}

SosCascade butter_lowpass(int order, double cutoff_hz, double fs) {
  return butter_lh(order, cutoff_hz, fs, false);
}

SosCascade butter_highpass(int order, double cutoff_hz, double fs) {
  return butter_lh(order, cutoff_hz, fs, true);
}

SosCascade butter_bandpass(int order, double low_hz, double high_hz, double fs) {
  check_design(order, fs);
  check_edge(low_hz, fs);
  check_edge(high_hz, fs);
  if (!(low_hz < high_hz)) {
    throw Error(ErrorKind::kInvalidBand, "band-pass low edge must be below the high edge");
  }
  const double w1 = prewarp(low_hz, fs);
  const double w2 = prewarp(high_hz, fs);
  const double bw = w2 - w1;
  const double w0_sq = w1 * w2;

  std::vector<Biquad> sections;
  for (const cd& p : prototype_poles(order)) {
    if (p.imag() < -1e-12) continue;
    // s^2 - p*bw*s + w0^2 = 0
    const cd pb = p * bw;
    const cd disc = std::sqrt(pb * pb - 4.0 * w0_sq);
    const cd s1 = (pb + disc) / 2.0;
    const cd s2 = (pb - disc) / 2.0;
    const cd z1 = bilinear(s1, fs);
    const cd z2 = bilinear(s2, fs);
    if (std::abs(p.imag()) <= 1e-12) {
      Biquad sec{1.0, 0.0, -1.0, 0.0, 0.0};
      set_denominator(sec, z1, z2);
      sections.push_back(sec);
    } else {
      Biquad a{1.0, 0.0, -1.0, 0.0, 0.0};
      set_denominator(a, z1, std::conj(z1));
      Biquad b{1.0, 0.0, -1.0, 0.0, 0.0};
      set_denominator(b, z2, std::conj(z2));
      sections.push_back(a);
      sections.push_back(b);
    }
  }
  // unit gain at the digital image of the analog centre frequency
  const double omega0 = 2.0 * std::atan(std::sqrt(w0_sq) / (2.0 * fs));
  const double g = std::abs(cascade_response(sections, omega0));
  const double per_section = std::pow(1.0 / g, 1.0 / static_cast<double>(sections.size()));
  for (auto& s : sections) {
    s.b0 *= per_section;
    s.b1 *= per_section;
    s.b2 *= per_section;
  }
  return SosCascade(std::move(sections));
}

SosCascade iir_notch(double f0_hz, double quality, double fs) {
  check_design(2, fs);
  check_edge(f0_hz, fs);
  if (!(quality > 0.0)) throw Error(ErrorKind::kInvalidInput, "notch quality must be positive");
  const double w0 = 2.0 * kPi * f0_hz / fs;
  const double beta = std::tan(w0 / quality / 2.0);
  const double gain = 1.0 / (1.0 + beta);
  Biquad s;
  s.b0 = gain;
  s.b1 = -2.0 * gain * std::cos(w0);
  s.b2 = gain;
  s.a1 = -2.0 * gain * std::cos(w0);
  s.a2 = 2.0 * gain - 1.0;
  return SosCascade({s});
}

SosCascade chain(const SosCascade& first, const SosCascade& second) {
  std::vector<Biquad> all = first.sections();
  all.insert(all.end(), second.sections().begin(), second.sections().end());
  return SosCascade(std::move(all));
}

}  // namespace emgkin::signal
