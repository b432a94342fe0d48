#include <math.h>
#include <stdio.h>
#include "mmtss.h"

int main(void) {
    enum { C = 2, L = 4000 };
    static double x[C * L];
    static double y[C * L];
    for (int i = 0; i < C * L; i++) x[i] = sin(0.01 * i) * 0.5;

    MmtssWaveform *w = NULL;
    MmtssSpectrogram *s = NULL;
    MmtssWaveform *r = NULL;
    if (mmtss_waveform_new(x, C, L, 16000, &w) != MMTSS_STATUS_OK) return 1;
    if (mmtss_stft(w, &s) != MMTSS_STATUS_OK) return 2;
    if (mmtss_istft(s, &r) != MMTSS_STATUS_OK) return 3;
    if (mmtss_waveform_copy(r, y, mmtss_waveform_channels(r) * mmtss_waveform_len(r)) != MMTSS_STATUS_OK) return 4;

    double sdr = 0.0;
    if (mmtss_si_sdr(y + 600, x + 600, 2000, &sdr) != MMTSS_STATUS_OK) return 5;
    if (sdr < 59.999) return 6;

    if (mmtss_waveform_new(NULL, 1, 10, 16000, &w) != MMTSS_STATUS_NULL_POINTER) return 7;
    char msg[128];
    if (mmtss_last_error_message(msg, sizeof msg) == 0) return 8;

    mmtss_waveform_free(r);
    mmtss_spectrogram_free(s);
    mmtss_waveform_free(w);
    printf("ok %s\n", mmtss_version());
    return 0;
}
