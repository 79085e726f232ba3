#pragma once

#include <iosfwd>
#include <string>

#include "simop/models.hpp"
#include "simop/verify.hpp"

namespace simop::io {

// Shortest decimal that parses back to the same double.
std::string format_double(double x);

// Header m_group,n_group,row,col,re,im; zero blocks omitted.
void write_block_matrix_csv(std::ostream& os, const BlockMatrix<cd>& x);
BlockMatrix<cd> read_block_matrix_csv(std::istream& is, PartitionPtr p);

// n,alpha,alpha_prime,alpha_tilde
void write_weights_csv(std::ostream& os, const WeightSequence<double>& w);

void write_spectrum_csv(std::ostream& os, const SpectrumReport& r);

// Self-contained SVG scatter of lambda_n, the estimates and the oracle values.
void write_spectrum_svg(std::ostream& os, const SpectrumReport& r);

// Strict coefficient tables.  Optional header line ("k,re,im" or
// "m,n,re,im"), blank lines and '#' comments skipped; anything else that is
// not a well-formed row, and any repeated key, is a parse_error carrying the
// line number.  source names the input in messages.
models::Coeffs parse_coeffs_csv(std::istream& is, const std::string& source);
models::Coeffs2 parse_coeffs2_csv(std::istream& is, const std::string& source);

}  // namespace simop::io
