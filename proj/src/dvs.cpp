#include "lanekeep/dvs.hpp"

#include <algorithm>
#include <cmath>

#include "lanekeep/errors.hpp"

namespace lanekeep {

BinaryImage BinaryImage::mirrored() const {
  BinaryImage out;
  for (int py = 0; py < kSensorSize; ++py) {
    for (int px = 0; px < kSensorSize; ++px) {
      if (at(px, py)) out.set(kSensorSize - 1 - px, py, true);
    }
  }
  return out;
}

EventFrame EventFrame::mirrored() const {
  EventFrame out = *this;
  for (auto& e : out.events) e.px = static_cast<std::uint8_t>(kSensorSize - 1 - e.px);
  return out;
}

ViewRenderer::ViewRenderer(const CameraModel& camera) : camera_(camera) {
  const double half = 0.5 * kSensorSize;
  const double focal = half / std::tan(0.5 * camera_.horizontal_fov);
  const double cd = std::cos(camera_.depression);
  const double sd = std::sin(camera_.depression);
  for (int py = 0; py < kSensorSize; ++py) {
    const double down = (py + 0.5 - half) / focal;
    // Ray = optical axis + right * x + image-down * y, in (forward, left, up).
    const double ray_up = -sd - down * cd;
    if (ray_up > -1e-9) continue;  // at or above the horizon
    const double t = camera_.mount_height / -ray_up;
    const double forward = t * (cd - down * sd);
    if (std::hypot(forward, t) > camera_.max_range) continue;
    for (int px = 0; px < kSensorSize; ++px) {
      const double right = (px + 0.5 - half) / focal;
      GroundRay r;
      r.index = static_cast<std::uint16_t>(BinaryImage::index(px, py));
      r.forward = camera_.forward_offset + forward;
      r.left = -t * right;
      rays_.push_back(r);
    }
  }
}

BinaryImage ViewRenderer::render(const Course& course, const RobotState& state) const {
  BinaryImage img;
  auto& bits = img.bits();
  const Vec2 origin = state.position();
  const Vec2 fwd = unit(state.heading);
  const Vec2 lft = left_normal(state.heading);
  for (const auto& r : rays_) {
    const Vec2 p = origin + r.forward * fwd + r.left * lft;
    if (course.marking_at(p)) bits.set(r.index);
  }
  return img;
}

BinaryImage render_view(const Course& course, const RobotState& state, const CameraModel& camera) {
  return ViewRenderer(camera).render(course, state);
}

EventFrame diff_events(const BinaryImage& prev, const BinaryImage& curr, long t) {
  EventFrame frame;
  frame.t = t;
  const auto changed = prev.bits() ^ curr.bits();
  frame.events.reserve(changed.count());
  for (int py = 0; py < kSensorSize; ++py) {
    for (int px = 0; px < kSensorSize; ++px) {
      const auto i = BinaryImage::index(px, py);
      if (!changed[i]) continue;
      frame.events.push_back({static_cast<std::uint8_t>(px), static_cast<std::uint8_t>(py),
                              curr.bits()[i] ? Polarity::on : Polarity::off});
    }
  }
  return frame;
}

void FrameQueue::push(EventFrame frame) {
  frames_.push_back(std::move(frame));
  while (frames_.size() > kFrameQueueLength) frames_.pop_front();
}

CountGrid condense_full(std::span<const EventFrame> frames) {
  CountGrid grid{kBinnedSize, kBinnedSize, std::vector<int>(kBinnedSize * kBinnedSize, 0)};
  for (const auto& f : frames) {
    for (const auto& e : f.events) {
      grid.counts[static_cast<std::size_t>((e.py / kDqnBlock) * kBinnedSize + e.px / kDqnBlock)] +=
          1;
    }
  }
  return grid;
}

BinnedState condense_dqn_state(std::span<const EventFrame> frames, const CropBand& band) {
  if (band.first_row < 0 || band.rows <= 0 || band.first_row + band.rows > kBinnedSize) {
    throw ConfigError("crop band outside the binned grid");
  }
  const auto full = condense_full(frames);
  BinnedState out;
  out.grid.rows = band.rows;
  out.grid.cols = kBinnedSize;
  const auto begin = full.counts.begin() + band.first_row * kBinnedSize;
  out.grid.counts.assign(begin, begin + band.rows * kBinnedSize);
  out.binary = binarize(out.grid.counts);
  return out;
}

BinnedState condense_dqn_state(const FrameQueue& queue, const CropBand& band) {
  const std::vector<EventFrame> frames(queue.frames().begin(), queue.frames().end());
  return condense_dqn_state(std::span<const EventFrame>(frames), band);
}

std::vector<std::uint8_t> binarize(std::span<const int> counts) {
  std::vector<std::uint8_t> out(counts.size());
  std::transform(counts.begin(), counts.end(), out.begin(),
                 [](int c) { return static_cast<std::uint8_t>(c > 0 ? 1 : 0); });
  return out;
}

std::vector<std::uint8_t> binarize(std::span<const std::uint8_t> values) {
  std::vector<std::uint8_t> out(values.size());
  std::transform(values.begin(), values.end(), out.begin(),
                 [](std::uint8_t c) { return static_cast<std::uint8_t>(c > 0 ? 1 : 0); });
  return out;
}

CountGrid rstdp_counts(const EventFrame& frame, const CropBand& band) {
  const int top = band.first_pixel_row();
  const int height = band.pixel_rows();
  if (top < 0 || top + height > kSensorSize || height % kRstdpRows != 0) {
    throw ConfigError("crop band incompatible with the 8x4 input grid");
  }
  const int cell_h = height / kRstdpRows;
  const int cell_w = kSensorSize / kRstdpColumns;
  CountGrid grid{kRstdpRows, kRstdpColumns, std::vector<int>(kRstdpInputs, 0)};
  for (const auto& e : frame.events) {
    const int row = e.py - top;
    if (row < 0 || row >= height) continue;
    grid.counts[static_cast<std::size_t>((row / cell_h) * kRstdpColumns + e.px / cell_w)] += 1;
  }
  return grid;
}

std::array<double, kRstdpInputs> condense_rstdp_input(const EventFrame& frame,
                                                      const CropBand& band,
                                                      const RateEncoding& enc) {
  if (enc.events_for_max_rate < 1) throw ConfigError("events_for_max_rate must be >= 1");
  const auto grid = rstdp_counts(frame, band);
  std::array<double, kRstdpInputs> rates{};
  const double n = enc.events_for_max_rate;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    rates[i] = std::min(static_cast<double>(grid.counts[i]), n) / n * enc.max_rate_hz;
  }
  return rates;
}

std::vector<double> dataset_scale(std::span<const int> counts, int i_max) {
  if (i_max < 1) throw ConfigError("dataset_scale: i_max must be >= 1 (empty dataset?)");
  std::vector<double> out(counts.size());
  std::transform(counts.begin(), counts.end(), out.begin(), [i_max](int c) {
    return std::clamp(static_cast<double>(c) / i_max, 0.0, 1.0);
  });
  return out;
}

EventFrame DvsEmulator::observe(const BinaryImage& image, long t) {
  const BinaryImage blank;
  auto frame = diff_events(last_ ? *last_ : blank, image, t);
  last_ = image;
  return frame;
}

}  // namespace lanekeep
