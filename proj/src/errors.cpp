#include "mqshmm/errors.hpp"

#include <exception>

namespace mqshmm {

void rethrow_with_context(const std::string& context) {
  try {
    throw;
  } catch (const ConvergenceFailure& e) {
    throw ConvergenceFailure(context + ": " + e.what(), e.last_residual());
  } catch (const InvalidGeometry& e) {
    throw InvalidGeometry(context + ": " + e.what());
  } catch (const InvalidLayout& e) {
    throw InvalidLayout(context + ": " + e.what());
  } catch (const SingularElement& e) {
    throw SingularElement(context + ": " + e.what());
  } catch (const SolverFailure& e) {
    throw SolverFailure(context + ": " + e.what());
  } catch (const NumericDomain& e) {
    throw NumericDomain(context + ": " + e.what());
  } catch (const Inconsistency& e) {
    throw Inconsistency(context + ": " + e.what());
  } catch (const CoverageError& e) {
    throw CoverageError(context + ": " + e.what());
  } catch (const RangeError& e) {
    throw RangeError(context + ": " + e.what());
  } catch (const UndefinedNorm& e) {
    throw UndefinedNorm(context + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(context + ": " + e.what());
  } catch (const BudgetExceeded& e) {
    throw BudgetExceeded(context + ": " + e.what());
  } catch (const Error& e) {
    throw Error(context + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(context + ": " + e.what());
  }
}

}  // namespace mqshmm
