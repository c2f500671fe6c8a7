#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "survkit/curves.hpp"
#include "survkit/dataset.hpp"

namespace survkit {

// Low-level CSV reader: RFC-style quoting ("" escapes a quote), rows of equal
// width not enforced here. Blank trailing lines are dropped.
std::vector<std::vector<std::string>> read_csv_table(std::istream& in);

// Reads a survival dataset. The header must contain the reserved columns
// `time` (positive decimal) and `event` (0/1); every other column becomes a
// covariate. An optional sidecar JSON file declares covariate kinds:
//   { "grade": "categorical",
//     "stage": { "categorical": ["I", "II", "III"] },
//     "age":   "numeric" }
// Columns not named there are inferred: numeric when every cell parses as a
// number, categorical otherwise (levels = sorted distinct values).
SurvDataset read_dataset_csv(const std::string& csv_path,
                             const std::string& schema_path = "");

// Reads a survival dataset against an existing schema: covariate columns are
// matched by name, categorical cells are mapped through the schema's declared
// levels (unseen level = error), extra columns are ignored. Use this to load
// test data for a model fitted elsewhere, so level codes line up.
SurvDataset read_dataset_csv(const std::string& csv_path, const Schema& schema);

// Covariate-only rows for scoring new subjects: schema columns are matched by
// name, `time`/`event` and unknown columns are ignored. Returns raw rows
// (level codes for categoricals) in file order.
std::vector<std::vector<double>> read_covariate_rows_csv(const std::string& csv_path,
                                                         const Schema& schema);

void write_curve_csv(std::ostream& out, const SurvivalCurve& curve);
void write_curve_csv(std::ostream& out, const CumHazardCurve& curve);

// Formats a double with enough digits to round-trip exactly.
std::string format_double(double v);

}  // namespace survkit
