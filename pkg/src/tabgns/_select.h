/* Branch-free "keep d where z > 0, else +0.0".
 * gcc lowers d * (z > 0) to a conditional jump, which mispredicts on the
 * random signs of ReLU pre-activations; an integer mask does not. */
#ifndef TABGNS_SELECT_H
#define TABGNS_SELECT_H
#include <stdint.h>
#include <string.h>

static inline double pos_select(double d, double z) {
    uint64_t bits, keep = (uint64_t)0 - (uint64_t)(z > 0.0);
    memcpy(&bits, &d, sizeof bits);
    bits &= keep;
    memcpy(&d, &bits, sizeof d);
    return d;
}
#endif
