#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fddcs/dictionary.hpp"
#include "fddcs/pilots.hpp"
#include "fddcs/types.hpp"

// Plain-text matrix files. Every entry is written as `re,im` with 17
// significant digits so a write/read round trip is exact.
//
//   DICT 1 <N> <M> <origin> [ul|dl]      then a line of M column norms, N rows
//   PILOT 1 <K> <T> <kind>               then a line of K powers, K rows
//   CHSET 1 <N> <N_R> <count> <freq_hz>  then records separated by blank lines
//
// Paired channel sets prefix each record with a tag line `UL <hz>` or
// `DL <hz>`; the uplink record of a pair comes first and `count` counts
// records, so a paired file holds count / 2 pairs.

namespace fddcs {

void write_dictionary(std::ostream& out, const Dictionary& d);
/// Throws FormatError on malformed input or when a column violates the unit
/// norm bound or disagrees with the stored norm line.
Dictionary read_dictionary(std::istream& in);
void save_dictionary(const std::string& path, const Dictionary& d);
Dictionary load_dictionary(const std::string& path);

void write_pilots(std::ostream& out, const PilotMatrix& p);
PilotMatrix read_pilots(std::istream& in);
void save_pilots(const std::string& path, const PilotMatrix& p);
PilotMatrix load_pilots(const std::string& path);

struct ChannelSet {
  Index antennas = 0;
  Index ue_antennas = 1;
  double frequency_hz = 0.0;     // uplink frequency for paired sets
  double downlink_hz = 0.0;      // 0 unless paired
  std::vector<CMatrix> channels;  // single-link channels, or the uplink halves
  std::vector<CMatrix> downlink;  // empty unless paired

  bool paired() const { return !downlink.empty(); }
  std::size_t size() const { return channels.size(); }
};

void write_channel_set(std::ostream& out, const ChannelSet& set);
ChannelSet read_channel_set(std::istream& in);
void save_channel_set(const std::string& path, const ChannelSet& set);
ChannelSet load_channel_set(const std::string& path);

/// `re,im` with 17 significant digits.
std::string format_complex(Complex z);
std::string format_real(double x);

}  // namespace fddcs
