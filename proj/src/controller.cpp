#include "mmodsim/controller.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace mmodsim {

namespace {

struct Crc32Table {
  uint32_t t[256];
  Crc32Table() {
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
  }
};
const Crc32Table kCrcTable;

}  // namespace

uint32_t crc32(const uint8_t* data, std::size_t len, uint32_t seed) {
  uint32_t c = seed ^ 0xFFFFFFFFu;
  for (std::size_t i = 0; i < len; ++i)
    c = kCrcTable.t[(c ^ data[i]) & 0xFFu] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

const char* to_string(CdssState s) {
  switch (s) {
    case CdssState::Initialization: return "initialization";
    case CdssState::Monitoring: return "monitoring";
    case CdssState::Communication: return "communication";
    case CdssState::ImpactDetection: return "impact_detection";
    default: return "periodic_measurement";
  }
}

const char* to_string(CdssEvent e) {
  switch (e) {
    case CdssEvent::HostCommand: return "host_command";
    case CdssEvent::ImpactTrigger: return "impact_trigger";
    case CdssEvent::PeriodicTimer: return "periodic_timer";
    case CdssEvent::WatchdogTimeout: return "watchdog_timeout";
    default: return "init_done";
  }
}

const char* to_string(CdssAction a) {
  switch (a) {
    case CdssAction::ClearBuffers: return "clear_buffers";
    case CdssAction::Calibrate: return "calibrate";
    case CdssAction::VerifySupplies: return "verify_supplies";
    case CdssAction::EstablishLink: return "establish_link";
    case CdssAction::CaptureAcoustic: return "capture_acoustic";
    case CdssAction::ActuatePiezo: return "actuate_piezo";
    case CdssAction::MeasureGrid: return "measure_grid";
    case CdssAction::CheckSupplies: return "check_supplies";
    case CdssAction::MeasureTemperatures: return "measure_temperatures";
    default: return "record_health";
  }
}

StepResult step(CdssState state, CdssEvent event) {
  StepResult r;
  // the watchdog resets from anywhere
  if (event == CdssEvent::WatchdogTimeout) {
    r.accepted = true;
    r.next = CdssState::Initialization;
    r.actions = {CdssAction::ClearBuffers, CdssAction::Calibrate, CdssAction::VerifySupplies};
    return r;
  }
  switch (state) {
    case CdssState::Initialization:
      if (event == CdssEvent::InitDone) {
        r.accepted = true;
        r.next = CdssState::Monitoring;
      }
      break;
    case CdssState::Monitoring:
      switch (event) {
        case CdssEvent::HostCommand:
          r.accepted = true;
          r.next = CdssState::Communication;
          r.actions = {CdssAction::EstablishLink};
          break;
        case CdssEvent::ImpactTrigger:
          r.accepted = true;
          r.next = CdssState::ImpactDetection;
          r.actions = {CdssAction::CaptureAcoustic, CdssAction::ActuatePiezo,
                       CdssAction::MeasureGrid, CdssAction::CheckSupplies};
          break;
        case CdssEvent::PeriodicTimer:
          r.accepted = true;
          r.next = CdssState::PeriodicMeasurement;
          r.actions = {CdssAction::MeasureGrid, CdssAction::MeasureTemperatures,
                       CdssAction::RecordHealth};
          break;
        default:
          break;
      }
      break;
    default:
      // busy states accept nothing but the watchdog
      break;
  }
  if (!r.accepted) r.next = state;
  return r;
}

namespace {

template <typename T>
void append_le(std::vector<uint8_t>& out, T value) {
  uint8_t buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

template <typename T>
T take_le(const std::vector<uint8_t>& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw std::runtime_error("record payload truncated");
  T value;
  std::memcpy(&value, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

constexpr uint8_t kRecordVersion = 1;

}  // namespace

std::vector<uint8_t> EventRecord::serialize() const {
  std::vector<uint8_t> out;
  append_le<uint8_t>(out, 'E');
  append_le<uint8_t>(out, 'R');
  append_le<uint8_t>(out, kRecordVersion);
  append_le<uint8_t>(out, static_cast<uint8_t>(kind));
  append_le<double>(out, timestamp);
  append_le<uint8_t>(out, supply_status);
  for (double t : temps) append_le<double>(out, t);

  append_le<uint8_t>(out, static_cast<uint8_t>(acoustic.size()));
  for (const auto& rec : acoustic) {
    append_le<uint8_t>(out, static_cast<uint8_t>(rec.channel));
    append_le<double>(out, rec.t0);
    append_le<double>(out, rec.sample_period);
    append_le<uint32_t>(out, static_cast<uint32_t>(rec.samples.size()));
    for (int16_t s : rec.samples) append_le<int16_t>(out, s);
  }

  append_le<uint8_t>(out, grid.has_value() ? 1 : 0);
  if (grid) {
    for (const auto& q : grid->quadrants) {
      append_le<double>(out, q.sum_counts);
      append_le<double>(out, q.diff_counts);
      append_le<double>(out, q.r_a);
      append_le<double>(out, q.r_b);
      append_le<uint8_t>(out, q.open_circuit ? 1 : 0);
    }
    for (double c : grid->thermistor_counts) append_le<double>(out, c);
    append_le<double>(out, grid->timestamp);
    append_le<double>(out, grid->channel_scan_period);
  }
  return out;
}

EventRecord EventRecord::deserialize(const std::vector<uint8_t>& bytes) {
  std::size_t pos = 0;
  if (take_le<uint8_t>(bytes, pos) != 'E' || take_le<uint8_t>(bytes, pos) != 'R')
    throw std::runtime_error("bad event record magic");
  if (take_le<uint8_t>(bytes, pos) != kRecordVersion)
    throw std::runtime_error("unsupported event record version");
  EventRecord rec;
  rec.kind = static_cast<RecordKind>(take_le<uint8_t>(bytes, pos));
  rec.timestamp = take_le<double>(bytes, pos);
  rec.supply_status = take_le<uint8_t>(bytes, pos);
  for (double& t : rec.temps) t = take_le<double>(bytes, pos);

  const int n_acoustic = take_le<uint8_t>(bytes, pos);
  rec.acoustic.resize(n_acoustic);
  for (auto& r : rec.acoustic) {
    r.channel = take_le<uint8_t>(bytes, pos);
    r.t0 = take_le<double>(bytes, pos);
    r.sample_period = take_le<double>(bytes, pos);
    const auto count = take_le<uint32_t>(bytes, pos);
    r.samples.resize(count);
    for (auto& s : r.samples) s = take_le<int16_t>(bytes, pos);
  }

  if (take_le<uint8_t>(bytes, pos)) {
    GridMeasurement gm;
    for (auto& q : gm.quadrants) {
      q.sum_counts = take_le<double>(bytes, pos);
      q.diff_counts = take_le<double>(bytes, pos);
      q.r_a = take_le<double>(bytes, pos);
      q.r_b = take_le<double>(bytes, pos);
      q.open_circuit = take_le<uint8_t>(bytes, pos) != 0;
    }
    for (double& c : gm.thermistor_counts) c = take_le<double>(bytes, pos);
    gm.timestamp = take_le<double>(bytes, pos);
    gm.channel_scan_period = take_le<double>(bytes, pos);
    rec.grid = gm;
  }
  return rec;
}

std::size_t ProtectedStore::slot_bytes(const Slot& s) {
  std::size_t n = 0;
  for (const auto& r : s.replicas) n += r.size();
  return n;
}

uint64_t ProtectedStore::store(const std::vector<uint8_t>& payload) {
  Slot slot;
  const uint32_t crc = crc32(payload.data(), payload.size());
  for (auto& rep : slot.replicas) {
    rep = payload;
    append_le<uint32_t>(rep, crc);
  }
  const std::size_t need = slot_bytes(slot);
  if (need > capacity_) throw std::length_error("record larger than store capacity");
  while (bytes_used_ + need > capacity_ && !records_.empty()) {
    bytes_used_ -= slot_bytes(records_.front());
    records_.erase(records_.begin());
    ++evictions_;
  }
  bytes_used_ += need;
  records_.push_back(std::move(slot));
  return next_index_++;
}

ReadResult ProtectedStore::read(uint64_t index) const {
  const uint64_t oldest = oldest_index();
  if (index < oldest || index >= next_index_)
    throw std::out_of_range("record index not in store (evicted or never written)");
  const Slot& slot = records_[static_cast<std::size_t>(index - oldest)];

  ReadResult out;
  const std::size_t blob_len = slot.replicas[0].size();
  std::vector<uint8_t> voted(blob_len);
  bool vote_failed = false;
  for (std::size_t i = 0; i < blob_len; ++i) {
    const uint8_t a = slot.replicas[0][i], b = slot.replicas[1][i], c = slot.replicas[2][i];
    // byte-granularity majority
    if (a == b || a == c) {
      voted[i] = a;
    } else if (b == c) {
      voted[i] = b;
    } else {
      voted[i] = a;  // no majority; the CRC check below decides
      vote_failed = true;
    }
  }
  bool any_flag = false;
  for (int r = 0; r < 3; ++r) {
    out.replica_flagged[r] = slot.replicas[r] != voted;
    any_flag = any_flag || out.replica_flagged[r];
  }

  const std::size_t payload_len = blob_len - 4;
  out.payload.assign(voted.begin(), voted.begin() + static_cast<std::ptrdiff_t>(payload_len));
  uint32_t stored_crc;
  std::memcpy(&stored_crc, voted.data() + payload_len, 4);
  const uint32_t computed = crc32(out.payload.data(), out.payload.size());
  if (vote_failed || computed != stored_crc) {
    out.status = ReadStatus::Unrecoverable;
    out.raw_replicas = slot.replicas;
    return out;
  }
  out.status = any_flag ? ReadStatus::Corrected : ReadStatus::Clean;
  return out;
}

EventRecord ProtectedStore::read_record(uint64_t index) const {
  const ReadResult r = read(index);
  if (r.status == ReadStatus::Unrecoverable)
    throw std::runtime_error("unrecoverable corruption in stored record");
  return EventRecord::deserialize(r.payload);
}

void ProtectedStore::inject_fault(uint64_t index, int replica, std::size_t byte_offset,
                                  int bit) {
  const uint64_t oldest = oldest_index();
  if (index < oldest || index >= next_index_)
    throw std::out_of_range("record index not in store");
  if (replica < 0 || replica > 2) throw std::out_of_range("replica index");
  if (bit < 0 || bit > 7) throw std::out_of_range("bit index");
  auto& blob = records_[static_cast<std::size_t>(index - oldest)].replicas[replica];
  if (byte_offset >= blob.size()) throw std::out_of_range("byte offset past record end");
  blob[byte_offset] ^= static_cast<uint8_t>(1u << bit);
}

namespace {
constexpr char kStoreMagic[8] = {'M', 'M', 'S', 'T', 'O', 'R', 'E', '1'};
}

void ProtectedStore::dump(std::ostream& os) const {
  os.write(kStoreMagic, sizeof(kStoreMagic));
  uint64_t cap = capacity_;
  uint32_t count = static_cast<uint32_t>(records_.size());
  uint64_t next = next_index_;
  os.write(reinterpret_cast<const char*>(&cap), 8);
  os.write(reinterpret_cast<const char*>(&count), 4);
  os.write(reinterpret_cast<const char*>(&next), 8);
  for (const auto& slot : records_) {
    const uint32_t len = static_cast<uint32_t>(slot.replicas[0].size());
    os.write(reinterpret_cast<const char*>(&len), 4);
    for (const auto& rep : slot.replicas)
      os.write(reinterpret_cast<const char*>(rep.data()),
               static_cast<std::streamsize>(rep.size()));
  }
}

ProtectedStore ProtectedStore::restore(std::istream& is) {
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kStoreMagic, 8) != 0)
    throw std::runtime_error("not a store dump");
  uint64_t cap, next;
  uint32_t count;
  is.read(reinterpret_cast<char*>(&cap), 8);
  is.read(reinterpret_cast<char*>(&count), 4);
  is.read(reinterpret_cast<char*>(&next), 8);
  ProtectedStore store(cap);
  store.next_index_ = next - count;
  for (uint32_t i = 0; i < count; ++i) {
    uint32_t len;
    is.read(reinterpret_cast<char*>(&len), 4);
    Slot slot;
    for (auto& rep : slot.replicas) {
      rep.resize(len);
      is.read(reinterpret_cast<char*>(rep.data()), len);
    }
    if (!is) throw std::runtime_error("truncated store dump");
    store.bytes_used_ += slot_bytes(slot);
    store.records_.push_back(std::move(slot));
    ++store.next_index_;
  }
  return store;
}

CalibrationResult calibrate_wave_speed(const std::array<DigitizedRecord, 4>& piezo_records,
                                       const SensorGeometry& geom, int layer,
                                       double initial_speed, double lsb,
                                       const ArrivalParams& params, int max_iterations) {
  CalibrationResult out;
  std::array<double, kSensorsPerLayer> arrivals;
  arrivals.fill(std::numeric_limits<double>::quiet_NaN());
  for (int i = 0; i < kSensorsPerLayer; ++i) {
    const ArrivalResult r = energy_arrival_time(piezo_records[i], lsb, params);
    if (r.detected) {
      arrivals[i] = r.time;
      ++out.usable_sensors;
    }
  }
  if (out.usable_sensors < 3) return out;  // calibration failed

  const Vec2 target = geom.piezo_position[layer];
  auto miss = [&](double speed) {
    const LayerHit hit = multilaterate(arrivals, geom.sensor_positions[layer], speed, geom, layer);
    return distance(hit.position, target);
  };

  // golden-section over a bracket wide enough for a +/-10% initial error
  const double phi = 0.6180339887498949;
  double lo = 0.80 * initial_speed, hi = 1.20 * initial_speed;
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double f1 = miss(x1), f2 = miss(x2);
  int iters = 2;
  while (iters < max_iterations && (hi - lo) > 1e-4 * initial_speed) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = miss(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = miss(x2);
    }
    ++iters;
  }
  out.ok = true;
  out.wave_speed = 0.5 * (lo + hi);
  out.iterations = iters;
  return out;
}

void Cdss::logline(const std::string& s) {
  std::ostringstream os;
  os.precision(9);
  os << "t=" << clock_now() << " " << s;
  log_.push_back(os.str());
}

StepResult Cdss::dispatch(CdssEvent event) {
  const StepResult r = step(state_, event);
  if (!r.accepted) {
    logline(std::string("reject state=") + to_string(state_) + " event=" + to_string(event));
    return r;
  }
  std::string line = std::string("event=") + to_string(event) + " " + to_string(state_) +
                     " -> " + to_string(r.next);
  for (CdssAction a : r.actions) line += std::string(" action=") + to_string(a);
  state_ = r.next;
  logline(line);
  return r;
}

void Cdss::complete() {
  if (state_ == CdssState::Communication || state_ == CdssState::ImpactDetection ||
      state_ == CdssState::PeriodicMeasurement) {
    logline(std::string("complete ") + to_string(state_) + " -> monitoring");
    state_ = CdssState::Monitoring;
  }
}

uint64_t Cdss::store_event(const EventRecord& rec) {
  const uint64_t idx = store_.store_record(rec);
  std::ostringstream os;
  os << "stored record index=" << idx << " bytes=" << rec.serialize().size()
     << " kind=" << static_cast<int>(rec.kind);
  logline(os.str());
  return idx;
}

}  // namespace mmodsim
