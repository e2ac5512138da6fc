package util

// Rev reverses a string rune by rune.
func Rev(s string) string {
	r := []rune(s)
	for i, j := 0, len(r)-1; i < j; i, j = i+1, j-1 {
		r[i], r[j] = r[j], r[i]
	}
	return string(r)
}

func Palindrome(s string) bool {
	return Rev(s) == s
}
