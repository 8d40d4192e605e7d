#pragma once

// Factorization of a fully digital per-node precoder F (n_t x q) into an
// analog stage F_RF, whose columns are drawn from the node's transmit array
// responses, and a baseband stage F_BB, by simultaneous orthogonal matching
// pursuit.

#include <span>
#include <vector>

#include "hbf/design.hpp"
#include "hbf/linalg.hpp"

namespace hbf {

struct SompResult {
    CMatrix f_rf;                        // n_t x n_rf, columns of the dictionary
    CMatrix f_bb;                        // n_rf x q
    std::vector<int> selected;           // dictionary column per RF chain
    std::vector<double> residual_norms;  // ||F - F_RF F_BB||_F after each pick, before power rescaling
    double scale = 1.0;                  // positive factor applied to F_BB at the end
};

/// Greedy selection of n_rf distinct dictionary columns.  Each step scores
/// the columns by the row energies of A^H F_res, picks the largest (lowest
/// index on ties, previously chosen columns skipped), refits F_BB by least
/// squares and renormalizes the residual.  F_BB is finally scaled so that
/// ||F_RF F_BB||_F = ||F||_F.
///
/// Throws DimensionError when n_rf exceeds the dictionary size or shapes
/// disagree.
SompResult somp_decompose(const CMatrix& f_opt, const CMatrix& a_s, int n_rf);

struct HybridPrecoder {
    std::vector<CMatrix> f_rf;
    std::vector<CMatrix> f_bb;
    CMatrix network_rf;  // block_diag(F_RF,1, ..., F_RF,M)
    CMatrix network_bb;  // block_diag(F_BB,1, ..., F_BB,M)

    /// F_RF,m F_BB,m per node.
    std::vector<CMatrix> effective() const;
};

HybridPrecoder assemble_network_hybrid(std::vector<CMatrix> f_rf, std::vector<CMatrix> f_bb);

/// Runs somp_decompose() on every node of a digital design.
HybridPrecoder design_hybrid(const DigitalPrecoder& digital, std::span<const CMatrix> a_s, int n_rf);

struct HybridPenalty {
    double penalty = 0.0;              // hybrid_mse - digital_mse
    double digital_mse = 0.0;
    double hybrid_mse = 0.0;
    double constraint_residual = 0.0;  // ||Z f_hybrid - b|| / ||b||
};

/// MSE change from replacing node `node`'s digital precoder by F_RF F_BB.
/// Both MSEs are the full expected error (evaluate_mse_full), so the
/// zero-forcing violation of the hybrid precoder counts as bias.
HybridPenalty hybrid_mse_penalty(const DigitalPrecoder& f_opt, const CMatrix& f_rf, const CMatrix& f_bb,
                                 const DesignProblem& prob, std::size_t node);

}  // namespace hbf
