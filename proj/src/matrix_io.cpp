#include "fddcs/matrix_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace fddcs {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

bool blank(const std::string& line) { return line.find_first_not_of(" \t\r") == std::string::npos; }

double parse_real(const std::string& s, const std::string& what) {
  const char* b = s.c_str();
  char* e = nullptr;
  const double v = std::strtod(b, &e);
  if (e == b || *e != '\0') throw FormatError(what + ": cannot parse number '" + s + "'");
  return v;
}

Index parse_count(const std::string& s, const std::string& what) {
  const double v = parse_real(s, what);
  if (v < 0.0 || v != static_cast<double>(static_cast<Index>(v)))
    throw FormatError(what + ": expected a non-negative integer, got '" + s + "'");
  return static_cast<Index>(v);
}

Complex parse_complex(const std::string& s, const std::string& what) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw FormatError(what + ": expected re,im, got '" + s + "'");
  return {parse_real(s.substr(0, comma), what), parse_real(s.substr(comma + 1), what)};
}

bool next_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

std::string require_line(std::istream& in, const std::string& what) {
  std::string line;
  if (!next_line(in, line)) throw FormatError(what + ": unexpected end of file");
  return line;
}

void write_rows(std::ostream& out, const CMatrix& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) out << (j ? " " : "") << format_complex(m(i, j));
    out << '\n';
  }
}

CMatrix read_rows(std::istream& in, Index rows, Index cols, const std::string& what) {
  CMatrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const auto toks = split_ws(require_line(in, what));
    if (static_cast<Index>(toks.size()) != cols)
      throw FormatError(what + ": row " + std::to_string(i) + " has " +
                        std::to_string(toks.size()) + " entries, expected " +
                        std::to_string(cols));
    for (Index j = 0; j < cols; ++j)
      m(i, j) = parse_complex(toks[static_cast<std::size_t>(j)], what);
  }
  return m;
}

RVector read_real_line(std::istream& in, Index n, const std::string& what) {
  const auto toks = split_ws(require_line(in, what));
  if (static_cast<Index>(toks.size()) != n)
    throw FormatError(what + ": expected " + std::to_string(n) + " values, got " +
                      std::to_string(toks.size()));
  RVector v(n);
  for (Index i = 0; i < n; ++i) v(i) = parse_real(toks[static_cast<std::size_t>(i)], what);
  return v;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return in;
}

void finish_write(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace

std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string format_complex(Complex z) { return format_real(z.real()) + "," + format_real(z.imag()); }

void write_dictionary(std::ostream& out, const Dictionary& d) {
  validate_dictionary(d);
  out << "DICT 1 " << d.rows() << ' ' << d.atoms() << ' ' << to_string(d.origin);
  if (!d.link.empty()) out << ' ' << d.link;
  out << '\n';
  for (Index j = 0; j < d.atoms(); ++j) out << (j ? " " : "") << format_real(d.matrix.col(j).norm());
  out << '\n';
  write_rows(out, d.matrix);
}

Dictionary read_dictionary(std::istream& in) {
  const std::string what = "DICT";
  const auto head = split_ws(require_line(in, what));
  if (head.size() < 5 || head.size() > 6 || head[0] != "DICT")
    throw FormatError("DICT: bad header, expected 'DICT 1 <N> <M> <origin> [link]'");
  if (head[1] != "1") throw FormatError("DICT: unsupported version " + head[1]);
  const Index n = parse_count(head[2], what);
  const Index m = parse_count(head[3], what);
  if (n < 1 || m < 1) throw FormatError("DICT: empty dimensions");
  Dictionary d;
  try {
    d.origin = dictionary_origin_from_string(head[4]);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("DICT: ") + e.what());
  }
  if (head.size() == 6) {
    if (head[5] != "ul" && head[5] != "dl") throw FormatError("DICT: link must be ul or dl");
    d.link = head[5];
  }
  d.label = head[4];
  const RVector norms = read_real_line(in, m, "DICT norms");
  d.matrix = read_rows(in, n, m, what);
  for (Index j = 0; j < m; ++j) {
    const double c = d.matrix.col(j).norm();
    if (!std::isfinite(c)) throw FormatError("DICT: column " + std::to_string(j) + " not finite");
    if (c > 1.0 + 1e-9)
      throw FormatError("DICT: column " + std::to_string(j) + " has norm " + format_real(c) +
                        " > 1");
    if (std::abs(c - norms(j)) > 1e-9 * std::max(1.0, c))
      throw FormatError("DICT: column " + std::to_string(j) + " norm " + format_real(c) +
                        " disagrees with header value " + format_real(norms(j)));
  }
  try {
    validate_dictionary(d);
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
  return d;
}

void save_dictionary(const std::string& path, const Dictionary& d) {
  auto out = open_out(path);
  write_dictionary(out, d);
  finish_write(out, path);
}

Dictionary load_dictionary(const std::string& path) {
  auto in = open_in(path);
  return read_dictionary(in);
}

void write_pilots(std::ostream& out, const PilotMatrix& p) {
  validate_pilots(p);
  out << "PILOT 1 " << p.users() << ' ' << p.symbols() << ' ' << (p.kind.empty() ? "custom" : p.kind)
      << '\n';
  for (Index k = 0; k < p.users(); ++k) out << (k ? " " : "") << format_real(p.power(k));
  out << '\n';
  write_rows(out, p.S);
}

PilotMatrix read_pilots(std::istream& in) {
  const std::string what = "PILOT";
  const auto head = split_ws(require_line(in, what));
  if (head.size() != 5 || head[0] != "PILOT")
    throw FormatError("PILOT: bad header, expected 'PILOT 1 <K> <T> <kind>'");
  if (head[1] != "1") throw FormatError("PILOT: unsupported version " + head[1]);
  const Index k = parse_count(head[2], what);
  const Index t = parse_count(head[3], what);
  if (k < 1 || t < 1) throw FormatError("PILOT: empty dimensions");
  PilotMatrix p;
  p.kind = head[4];
  p.power = read_real_line(in, k, "PILOT powers");
  p.S = read_rows(in, k, t, what);
  try {
    validate_pilots(p);
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
  return p;
}

void save_pilots(const std::string& path, const PilotMatrix& p) {
  auto out = open_out(path);
  write_pilots(out, p);
  finish_write(out, path);
}

PilotMatrix load_pilots(const std::string& path) {
  auto in = open_in(path);
  return read_pilots(in);
}

void write_channel_set(std::ostream& out, const ChannelSet& set) {
  if (set.paired() && set.downlink.size() != set.channels.size())
    throw std::invalid_argument("CHSET: uplink and downlink counts differ");
  const std::size_t records = set.channels.size() * (set.paired() ? 2 : 1);
  out << "CHSET 1 " << set.antennas << ' ' << set.ue_antennas << ' ' << records << ' '
      << format_real(set.frequency_hz) << '\n';
  auto record = [&](const CMatrix& h) {
    if (h.rows() != set.antennas || h.cols() != set.ue_antennas)
      throw std::invalid_argument("CHSET: channel dimensions disagree with header");
    write_rows(out, h);
  };
  for (std::size_t i = 0; i < set.channels.size(); ++i) {
    out << '\n';
    if (set.paired()) {
      out << "UL " << format_real(set.frequency_hz) << '\n';
      record(set.channels[i]);
      out << "\nDL " << format_real(set.downlink_hz) << '\n';
      record(set.downlink[i]);
    } else {
      record(set.channels[i]);
    }
  }
}

ChannelSet read_channel_set(std::istream& in) {
  const std::string what = "CHSET";
  const auto head = split_ws(require_line(in, what));
  if (head.size() != 6 || head[0] != "CHSET")
    throw FormatError("CHSET: bad header, expected 'CHSET 1 <N> <N_R> <count> <freq_hz>'");
  if (head[1] != "1") throw FormatError("CHSET: unsupported version " + head[1]);
  ChannelSet set;
  set.antennas = parse_count(head[2], what);
  set.ue_antennas = parse_count(head[3], what);
  const Index count = parse_count(head[4], what);
  set.frequency_hz = parse_real(head[5], what);
  if (set.antennas < 1 || set.ue_antennas < 1) throw FormatError("CHSET: empty dimensions");

  std::string line;
  int tagged = -1;  // unknown until the first record
  for (Index r = 0; r < count; ++r) {
    do {
      if (!next_line(in, line))
        throw FormatError("CHSET: expected " + std::to_string(count) + " records, found " +
                          std::to_string(r));
    } while (blank(line));
    const auto toks = split_ws(line);
    const bool has_tag = toks[0] == "UL" || toks[0] == "DL";
    if (tagged < 0) tagged = has_tag;
    if (has_tag != static_cast<bool>(tagged))
      throw FormatError("CHSET: record " + std::to_string(r) + " mixes tagged and untagged");
    CMatrix h(set.antennas, set.ue_antennas);
    Index first_row = 0;
    if (has_tag) {
      const bool want_ul = r % 2 == 0;
      if ((toks[0] == "UL") != want_ul)
        throw FormatError("CHSET: record " + std::to_string(r) + " expected tag " +
                          (want_ul ? "UL" : "DL"));
      if (toks.size() != 2) throw FormatError("CHSET: tag line needs a frequency");
      const double f = parse_real(toks[1], what);
      if (want_ul) {
        if (f != set.frequency_hz) throw FormatError("CHSET: UL frequency disagrees with header");
      } else if (set.downlink_hz == 0.0) {
        set.downlink_hz = f;
      } else if (f != set.downlink_hz) {
        throw FormatError("CHSET: inconsistent DL frequencies");
      }
    } else {
      if (static_cast<Index>(toks.size()) != set.ue_antennas)
        throw FormatError("CHSET: record " + std::to_string(r) + " row 0 has wrong width");
      for (Index j = 0; j < set.ue_antennas; ++j)
        h(0, j) = parse_complex(toks[static_cast<std::size_t>(j)], what);
      first_row = 1;
    }
    if (first_row < set.antennas)
      h.bottomRows(set.antennas - first_row) =
          read_rows(in, set.antennas - first_row, set.ue_antennas, what);
    if (has_tag && r % 2 == 1)
      set.downlink.push_back(std::move(h));
    else
      set.channels.push_back(std::move(h));
  }
  if (tagged == 1 && count % 2 != 0) throw FormatError("CHSET: unpaired UL record at the end");
  while (next_line(in, line))
    if (!blank(line)) throw FormatError("CHSET: trailing data after " + std::to_string(count) + " records");
  return set;
}

void save_channel_set(const std::string& path, const ChannelSet& set) {
  auto out = open_out(path);
  write_channel_set(out, set);
  finish_write(out, path);
}

ChannelSet load_channel_set(const std::string& path) {
  auto in = open_in(path);
  return read_channel_set(in);
}

}  // namespace fddcs
