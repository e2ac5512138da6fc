package util

import "strings"

// Twice returns s repeated two times.
func Twice(s string) string {
	return s + s
}

// Words splits s on whitespace and drops empty fields.
func Words(s string) []string {
	out := []string{}
	for _, w := range strings.Fields(s) {
		if w != "" {
			out = append(out, w)
		}
	}
	return out
}

func Count(items []string, target string) int {
	n := 0
	for _, it := range items {
		if it == target {
			n++
		}
	}
	return n
}
