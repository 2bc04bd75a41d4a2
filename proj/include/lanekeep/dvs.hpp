#pragma once

#include <array>
#include <bitset>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "lanekeep/geometry.hpp"
#include "lanekeep/track.hpp"

namespace lanekeep {

inline constexpr int kSensorSize = 128;
inline constexpr int kDqnBlock = 4;                        // 128 / 4 = 32 binned columns
inline constexpr int kBinnedSize = kSensorSize / kDqnBlock;
inline constexpr int kRstdpColumns = 8;
inline constexpr int kRstdpRows = 4;
inline constexpr int kRstdpInputs = kRstdpColumns * kRstdpRows;
inline constexpr std::size_t kFrameQueueLength = 10;

struct CameraModel {
  double mount_height{0.3};
  double forward_offset{0.15};
  double depression{kPi / 6.0};
  double horizontal_fov{deg2rad(70.0)};
  double max_range{10.0};
};

/// 128x128 binary render: 1 where a pixel sees paint.
class BinaryImage {
public:
  bool at(int px, int py) const { return bits_[index(px, py)]; }
  void set(int px, int py, bool value) { bits_[index(px, py)] = value; }
  std::size_t count() const { return bits_.count(); }
  const std::bitset<kSensorSize * kSensorSize>& bits() const { return bits_; }
  std::bitset<kSensorSize * kSensorSize>& bits() { return bits_; }

  BinaryImage mirrored() const;

  static constexpr std::size_t index(int px, int py) {
    return static_cast<std::size_t>(py) * kSensorSize + static_cast<std::size_t>(px);
  }

  friend bool operator==(const BinaryImage&, const BinaryImage&) = default;

private:
  std::bitset<kSensorSize * kSensorSize> bits_;
};

enum class Polarity : std::uint8_t { off, on };

struct Event {
  std::uint8_t px{};
  std::uint8_t py{};
  Polarity polarity{Polarity::on};
};

/// Events of one 50 ms interval; t is the world step index.
struct EventFrame {
  std::vector<Event> events;
  long t{0};

  EventFrame mirrored() const;
};

/// Precomputed ground-plane ray table for a fixed camera mount.
class ViewRenderer {
public:
  explicit ViewRenderer(const CameraModel& camera = {});

  BinaryImage render(const Course& course, const RobotState& state) const;
  const CameraModel& camera() const { return camera_; }

private:
  struct GroundRay {
    std::uint16_t index{};
    double forward{};
    double left{};
  };

  CameraModel camera_;
  std::vector<GroundRay> rays_;
};

BinaryImage render_view(const Course& course, const RobotState& state, const CameraModel& camera);

/// ON where a pixel turned 0 -> 1, OFF where 1 -> 0.
EventFrame diff_events(const BinaryImage& prev, const BinaryImage& curr, long t = 0);

/// FIFO of the last ten frames.
class FrameQueue {
public:
  void push(EventFrame frame);
  void clear() { frames_.clear(); }
  std::size_t size() const { return frames_.size(); }
  const std::deque<EventFrame>& frames() const { return frames_; }

private:
  std::deque<EventFrame> frames_;
};

/// Rows of the 32-row binned grid that are kept (top and bottom are cropped).
struct CropBand {
  int first_row{8};
  int rows{16};

  int first_pixel_row() const { return first_row * kDqnBlock; }
  int pixel_rows() const { return rows * kDqnBlock; }
};

/// Row-major grid of event counts.
struct CountGrid {
  int rows{};
  int cols{};
  std::vector<int> counts;

  int at(int row, int col) const { return counts[static_cast<std::size_t>(row * cols + col)]; }
};

/// Event counts (both polarities) in 4x4 pixel blocks over the whole sensor.
CountGrid condense_full(std::span<const EventFrame> frames);

struct BinnedState {
  CountGrid grid;                    // cropped band, 16 x 32 by default
  std::vector<std::uint8_t> binary;  // 1 iff count > 0
};

BinnedState condense_dqn_state(const FrameQueue& queue, const CropBand& band = {});
BinnedState condense_dqn_state(std::span<const EventFrame> frames, const CropBand& band = {});

std::vector<std::uint8_t> binarize(std::span<const int> counts);
std::vector<std::uint8_t> binarize(std::span<const std::uint8_t> values);

struct RateEncoding {
  double max_rate_hz{300.0};
  int events_for_max_rate{15};
};

/// Events of the cropped band binned 4 rows x 8 columns, row-major, as counts.
CountGrid rstdp_counts(const EventFrame& frame, const CropBand& band = {});

/// Poisson rates (Hz) for the 32 R-STDP inputs: min(count, n) / n * max rate.
std::array<double, kRstdpInputs> condense_rstdp_input(const EventFrame& frame,
                                                      const CropBand& band = {},
                                                      const RateEncoding& enc = {});

/// count / i_max clamped to [0, 1]. Throws ConfigError when i_max < 1.
std::vector<double> dataset_scale(std::span<const int> counts, int i_max);

/// Stateful event emulator: differences each render against the previous one.
/// A fresh emulator has a blank baseline.
class DvsEmulator {
public:
  EventFrame observe(const BinaryImage& image, long t);
  void reset() { last_.reset(); }

private:
  std::optional<BinaryImage> last_;
};

}  // namespace lanekeep
