#include "simop/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

namespace simop::io {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != ' ' && c != '\t' && c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

[[noreturn]] void fail(const std::string& source, int line, const std::string& why) {
  throw Error(ErrorKind::parse_error, source + ":" + std::to_string(line) + ": " + why, {{"line", line}});
}

double to_double(const std::string& s, const std::string& source, int line) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
    fail(source, line, "not a finite number: '" + s + "'");
  return v;
}

long to_long(const std::string& s, const std::string& source, int line) {
  long v = 0;
  const char* b = s.data();
  if (!s.empty() && s[0] == '+') ++b;
  auto [p, ec] = std::from_chars(b, s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size()) fail(source, line, "not an integer: '" + s + "'");
  return v;
}

int to_index(const std::string& s, const std::string& source, int line) {
  long v = to_long(s, source, line);
  if (v < -1000000 || v > 1000000) fail(source, line, "index out of range: '" + s + "'");
  return static_cast<int>(v);
}

// Calls row(fields, line) for each data row.
template <typename F>
void scan(std::istream& is, const std::string& source, const std::vector<std::string>& header, F&& row) {
  std::string line;
  int ln = 0;
  bool seen_data = false;
  while (std::getline(is, line)) {
    ++ln;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    auto f = split_fields(line);
    if (!seen_data && f == header) {
      seen_data = true;
      continue;
    }
    seen_data = true;
    if (f.size() != header.size())
      fail(source, ln, "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
    row(f, ln);
  }
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc()) return "nan";
  return std::string(buf, p);
}

void write_block_matrix_csv(std::ostream& os, const BlockMatrix<cd>& x) {
  os << "m_group,n_group,row,col,re,im\n";
  for (const auto& e : to_entries(x))
    os << e.m_group << ',' << e.n_group << ',' << e.row << ',' << e.col << ',' << format_double(e.re) << ','
       << format_double(e.im) << '\n';
}

BlockMatrix<cd> read_block_matrix_csv(std::istream& is, PartitionPtr p) {
  std::vector<BlockEntry> rows;
  scan(is, "block matrix", {"m_group", "n_group", "row", "col", "re", "im"},
       [&](const std::vector<std::string>& f, int ln) {
         rows.push_back({to_long(f[0], "block matrix", ln), to_long(f[1], "block matrix", ln),
                         to_long(f[2], "block matrix", ln), to_long(f[3], "block matrix", ln),
                         to_double(f[4], "block matrix", ln), to_double(f[5], "block matrix", ln)});
       });
  return from_entries(std::move(p), rows);
}

void write_weights_csv(std::ostream& os, const WeightSequence<double>& w) {
  os << "n,alpha,alpha_prime,alpha_tilde\n";
  for (int n = 0; n <= w.L + 1; ++n) {
    os << n << ',' << format_double(w.a(n)) << ',' << format_double(n >= 1 ? w.alpha_prime[static_cast<size_t>(n)] : 0.0)
       << ',' << format_double(n >= 1 ? w.alpha_tilde[static_cast<size_t>(n)] : 0.0) << '\n';
  }
}

void write_spectrum_csv(std::ostream& os, const SpectrumReport& r) {
  os << "n,lambda_re,lambda_im,estimate_re,estimate_im,oracle_re,oracle_im,p_re,p_im,q_re,q_im,b_re,b_im,residual,"
        "ambiguous\n";
  auto c = [&](cd z) { os << format_double(z.real()) << ',' << format_double(z.imag()) << ','; };
  for (const auto& row : r.rows) {
    os << row.n << ',';
    c(row.lambda);
    c(row.estimate);
    c(row.oracle);
    c(row.p);
    c(row.q);
    c(row.b);
    os << format_double(row.residual) << ',' << (row.ambiguous ? 1 : 0) << '\n';
  }
}

void write_spectrum_svg(std::ostream& os, const SpectrumReport& r) {
  double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
  bool first = true;
  auto grow = [&](cd z) {
    if (first) {
      xmin = xmax = z.real();
      ymin = ymax = z.imag();
      first = false;
    }
    xmin = std::min(xmin, z.real());
    xmax = std::max(xmax, z.real());
    ymin = std::min(ymin, z.imag());
    ymax = std::max(ymax, z.imag());
  };
  for (const auto& row : r.rows) {
    grow(row.lambda);
    grow(row.oracle);
    grow(row.estimate);
  }
  const double W = 640, H = 480, pad = 40;
  double dx = std::max(xmax - xmin, 1e-9), dy = std::max(ymax - ymin, 1e-9);
  auto px = [&](double x) { return pad + (x - xmin) / dx * (W - 2 * pad); };
  auto py = [&](double y) { return H - pad - (y - ymin) / dy * (H - 2 * pad); };
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << pad << "\" y=\"20\" font-size=\"12\">lambda (grey), oracle (red), estimate (blue ring)</text>\n";
  for (const auto& row : r.rows) {
    os << "<circle cx=\"" << format_double(px(row.lambda.real())) << "\" cy=\"" << format_double(py(row.lambda.imag()))
       << "\" r=\"2\" fill=\"#999\"/>\n";
    os << "<circle cx=\"" << format_double(px(row.oracle.real())) << "\" cy=\"" << format_double(py(row.oracle.imag()))
       << "\" r=\"2\" fill=\"#c00\"/>\n";
    os << "<circle cx=\"" << format_double(px(row.estimate.real())) << "\" cy=\""
       << format_double(py(row.estimate.imag())) << "\" r=\"4\" fill=\"none\" stroke=\"#00c\"/>\n";
  }
  os << "</svg>\n";
}

models::Coeffs parse_coeffs_csv(std::istream& is, const std::string& source) {
  models::Coeffs c;
  scan(is, source, {"k", "re", "im"}, [&](const std::vector<std::string>& f, int ln) {
    int k = to_index(f[0], source, ln);
    cd v(to_double(f[1], source, ln), to_double(f[2], source, ln));
    if (!c.emplace(k, v).second) fail(source, ln, "duplicate coefficient index " + std::to_string(k));
  });
  return c;
}

models::Coeffs2 parse_coeffs2_csv(std::istream& is, const std::string& source) {
  models::Coeffs2 c;
  scan(is, source, {"m", "n", "re", "im"}, [&](const std::vector<std::string>& f, int ln) {
    int m = to_index(f[0], source, ln), n = to_index(f[1], source, ln);
    cd v(to_double(f[2], source, ln), to_double(f[3], source, ln));
    if (!c.emplace(std::make_pair(m, n), v).second)
      fail(source, ln, "duplicate coefficient index (" + std::to_string(m) + "," + std::to_string(n) + ")");
  });
  return c;
}

}  // namespace simop::io
