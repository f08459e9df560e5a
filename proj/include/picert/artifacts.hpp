#pragma once

#include <string>

#include <json.hpp>

#include "picert/certificates.hpp"
#include "picert/pi.hpp"
#include "picert/system.hpp"
#include "picert/verify.hpp"

namespace picert {

using Json = nlohmann::json;

// Comparison-function trees round-trip through their flat view; infinite
// domains are encoded by omitting domain_max.
Json fn_tree_to_json(const FnTree& t);
FnTree fn_tree_from_json(const Json& j);
Json to_json(const ComparisonFn& f);
ComparisonFn comparison_fn_from_json(const Json& j);

Json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const Json& j);
Json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const Json& j);

std::string backend_name(Backend b);
Backend backend_from_name(const std::string& name);

// Problem files: finite problems carry their full tables, LQ problems their
// matrices, grid problems a named dynamics plus grid/action shape (the
// tables are recompiled on load).
Json problem_to_json(const Problem& p);
Problem problem_from_json(const Json& j);
Problem load_problem(const std::string& path);

Json to_json(const Policy& h);
Policy policy_from_json(const Json& j);
Json to_json(const ValueFn& v);
ValueFn value_fn_from_json(const Json& j);
Json to_json(const PIRun& run);
PIRun pirun_from_json(const Json& j);

Json to_json(const CertificateSet& certs);
CertificateSet certificates_from_json(const Json& j);

Json to_json(const Witness& w);
Json to_json(const CheckResult& c);
Json to_json(const VerificationReport& rep);

// CSV emission: RFC-4180 quoting, '.' decimal separator, LF line ends,
// shortest round-trip doubles.
std::string csv_field(double v);
std::string csv_escape(const std::string& s);
std::string report_to_csv(const VerificationReport& rep);

// 64-bit FNV-1a of the canonical JSON dump; stable across platforms.
std::string fnv1a_hex(const std::string& bytes);
std::string certificate_hash(const CertificateSet& certs);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
Json load_json(const std::string& path);
void write_json(const std::string& path, const Json& j);

}  // namespace picert
