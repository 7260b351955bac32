#include <math.h>
#include <stdio.h>
#include "levycert.h"

int main(void) {
    LcW1Constants w;
    if (lc_w1_formula(1.0, 2.0, 0.0, &w) != LC_STATUS_OK) return 1;
    if (fabs(w.lambda - 0.13447071068499756) > 1e-15) return 2;

    LcScenario *s = NULL;
    if (lc_scenario_catalog(0, &s) != LC_STATUS_OK) return 3;
    LcCertificate *c = NULL;
    if (lc_certify(s, LC_CERT_KIND_W1, 0.0, &c) != LC_STATUS_OK) return 4;
    LcCertificateValues v;
    lc_certificate_values(c, &v);
    if (v.big_c != 1.0 || v.lambda != 1.0) return 5;
    lc_certificate_free(c);

    if (lc_certify(s, LC_CERT_KIND_TV, 0.0, &c) != LC_STATUS_REJECTED) return 6;
    if (lc_last_error() == NULL) return 7;
    lc_scenario_free(s);
    printf("ok %s\n", lc_version());
    return 0;
}
