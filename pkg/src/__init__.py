# This file makes 'src' a recognized Python package.
