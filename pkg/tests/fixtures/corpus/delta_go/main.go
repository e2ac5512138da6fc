package main

import (
	"fmt"

	"delta/util"
)

func main() {
	words := util.Words("level noon go gopher level")
	total := util.Count(words, "level")
	for _, w := range words {
		if util.Palindrome(w) {
			fmt.Println("palindrome:", w, util.Rev(w))
		}
	}
	fmt.Println(util.Twice("ab"), total)
}
