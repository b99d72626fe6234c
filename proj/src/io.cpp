#include "fedmask/io.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fedmask {

namespace {

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& in, std::size_t off) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[off + i])) << (8 * i);
  return v;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

void atomic_write(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  const fs::path tmp = target.parent_path() / (target.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
  }
  fs::rename(tmp, target);
}

void save_checkpoint(const std::string& path, const ParamVector& params, std::uint64_t round) {
  std::string blob;
  blob.reserve(16 + 8 * static_cast<std::size_t>(params.values.size()));
  put_u64(blob, static_cast<std::uint64_t>(params.values.size()));
  for (Eigen::Index i = 0; i < params.values.size(); ++i) {
    std::uint64_t bits;
    const double v = params.values[i];
    std::memcpy(&bits, &v, 8);
    put_u64(blob, bits);
  }
  put_u64(blob, round);
  atomic_write(path, blob);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string blob = ss.str();
  if (blob.size() < 16) throw std::runtime_error("checkpoint truncated: " + path);
  const std::uint64_t count = get_u64(blob, 0);
  if (blob.size() != 16 + 8 * count) throw std::runtime_error("checkpoint size mismatch: " + path);
  Checkpoint ck;
  ck.params.values.resize(static_cast<Eigen::Index>(count));
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t bits = get_u64(blob, 8 + 8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    ck.params.values[static_cast<Eigen::Index>(i)] = v;
  }
  ck.round = get_u64(blob, 8 + 8 * count);
  return ck;
}

std::string metrics_csv(const std::vector<RoundMetrics>& metrics) {
  std::ostringstream out;
  out << "round,global_loss,val_accuracy,precision,recall,f1,messages,bytes,latency_ms\n";
  for (const auto& m : metrics) {
    out << m.round << ',' << fmt(m.global_loss) << ',' << fmt(m.val_accuracy) << ','
        << fmt(m.precision) << ',' << fmt(m.recall) << ',' << fmt(m.f1) << ',' << m.messages << ','
        << m.bytes << ',' << fmt(m.latency_ms) << '\n';
  }
  return out.str();
}

std::string party_metrics_rows(const std::vector<PartyMetricsRow>& rows) {
  std::ostringstream out;
  for (const auto& r : rows) {
    out << r.label << ',' << fmt(r.loss) << ',' << fmt(r.accuracy) << ',' << fmt(r.precision)
        << ',' << fmt(r.recall) << ',' << fmt(r.f1) << ",0,0,0\n";
  }
  return out.str();
}

std::string transcript_jsonl(const Transcript& transcript) {
  std::ostringstream out;
  for (const auto& m : transcript.messages) {
    out << "{\"round_tag\":{\"round\":" << m.round_tag.round << ",\"phase\":" << m.round_tag.phase
        << "},\"sender\":" << m.sender << ",\"receiver\":" << m.receiver
        << ",\"byte_size\":" << m.byte_size << ",\"send_time\":" << fmt(m.send_time)
        << ",\"deliver_time\":" << fmt(m.deliver_time) << "}\n";
  }
  return out.str();
}

}  // namespace fedmask
