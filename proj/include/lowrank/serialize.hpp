#pragma once

#include <memory>

#include <json.hpp>

#include "lowrank/losses.hpp"

namespace lowrank {

using Json = nlohmann::json;

/// Matrices are stored as arrays of rows.
Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);
Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j);

/// Loss schema:
///   linear: {"kind":"linear","n","m","p","scale","d", "seed" | "A"}
///           A seeded operator is regenerated from (n, m, p, seed); otherwise
///           "A" lists the p sensing matrices.
///   onebit: {"kind":"onebit","n","scale","Y"}
///   lifted: {"kind":"lifted","n","m","phi","inner"}
Json loss_to_json(const MatrixLoss& loss);
std::shared_ptr<const MatrixLoss> loss_from_json(const Json& j);

}  // namespace lowrank
