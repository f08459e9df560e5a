#pragma once

#include <cstdint>

namespace picert {

// Every state-sweep kernel has a serial reference path and an OpenMP path.
// The two are kept bitwise-equal: parallel loops only ever write disjoint
// slots or reduce with max/min, which are order-independent in IEEE floats.
enum class ExecMode { Serial, Parallel };

// Reads PI_CERTIFY_THREADS once (cached): unset or 0 keeps the OpenMP
// default; 1 selects the serial reference path; n > 1 pins n threads.
ExecMode default_exec_mode();

// Thread count requested via PI_CERTIFY_THREADS, or 0 when unset.
int configured_threads();

// Applies the configured thread count to the OpenMP runtime (no-op when
// unset).  Called once from the command-line front end.
void apply_thread_config();

}  // namespace picert
